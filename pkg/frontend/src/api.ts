/**
 * Typed client for the pedstress local annotation API.
 *
 * The backend serializes its SCR table with string cells (missing values
 * arrive as null), so numeric fields are coerced at the boundary and the
 * rest of the app works with real numbers.
 */
import { z } from "zod";

const numeric = z.coerce.number();
const maybeNumeric = z
  .union([z.string(), z.number(), z.null()])
  .transform((v) => {
    if (v === null || v === "") return null;
    const n = Number(v);
    return Number.isNaN(n) ? null : n;
  });

export const TaxonomySchema = z.object({
  labels: z.array(z.string()).length(10),
  delete: z.string(),
  excluded_from_models: z.array(z.string()),
});
export type Taxonomy = z.infer<typeof TaxonomySchema>;

export const SessionInfoSchema = z.object({
  session_id: z.string(),
  participant_id: z.string(),
  n_scrs: z.number().int().nonnegative(),
  t0: z.number().nullable(),
});
export type SessionInfo = z.infer<typeof SessionInfoSchema>;

export const EdaSeriesSchema = z.object({
  unix_time: z.array(z.number()),
  sc: z.array(z.number()),
  tonic: z.array(z.number()),
  phasic: z.array(z.number()),
});
export type EdaSeries = z.infer<typeof EdaSeriesSchema>;

export const ScrSchema = z.object({
  participant_id: z.string(),
  session_id: z.string(),
  unix: numeric,
  elapsed_time: maybeNumeric,
  scr_amplitude: numeric,
  scr_onset_unix: numeric,
  scr_t: maybeNumeric,
  position: z.string().nullable(),
  position_f: z.string().nullable(),
  amp_class: z.string(),
  detected_scr_no: z.coerce.number().int(),
  annotation: z.string().nullable(),
});
export type Scr = z.infer<typeof ScrSchema>;

export const TrajectoryFrameSchema = z.object({
  unix: z.number(),
  entity_id: z.string(),
  entity_kind: z.string(),
  x: z.number(),
  y: z.number(),
  heading: z.number(),
});
export type TrajectoryFrame = z.infer<typeof TrajectoryFrameSchema>;

export const AnnotationRecordSchema = z.object({
  participant_id: z.string(),
  session_id: z.string(),
  detected_scr_no: z.coerce.number().int(),
  label: z.string(),
  coder_id: z.string(),
  created_at_unix: numeric,
});
export type AnnotationRecord = z.infer<typeof AnnotationRecordSchema>;

export interface AnnotatePayload {
  detected_scr_no: number;
  label: string;
  coder_id: string;
}

export type AnnotateResult =
  | { ok: true; record: AnnotationRecord }
  | { ok: false; errors: Record<string, string> };

export class ApiError extends Error {
  constructor(message: string, readonly status: number) {
    super(message);
  }
}

export class ApiClient {
  constructor(readonly baseUrl: string) {}

  private async getJson(path: string): Promise<unknown> {
    const res = await fetch(`${this.baseUrl}${path}`);
    if (!res.ok) {
      throw new ApiError(`GET ${path} -> ${res.status}`, res.status);
    }
    return res.json();
  }

  async taxonomy(): Promise<Taxonomy> {
    return TaxonomySchema.parse(await this.getJson("/api/taxonomy"));
  }

  async sessions(): Promise<SessionInfo[]> {
    return z.array(SessionInfoSchema).parse(await this.getJson("/api/sessions"));
  }

  async eda(sessionId: string): Promise<EdaSeries> {
    return EdaSeriesSchema.parse(
      await this.getJson(`/api/sessions/${sessionId}/eda`),
    );
  }

  async scrs(sessionId: string): Promise<Scr[]> {
    return z
      .array(ScrSchema)
      .parse(await this.getJson(`/api/sessions/${sessionId}/scrs`));
  }

  async trajectory(sessionId: string): Promise<TrajectoryFrame[]> {
    return z
      .array(TrajectoryFrameSchema)
      .parse(await this.getJson(`/api/sessions/${sessionId}/trajectory`));
  }

  async annotations(
    sessionId: string,
    coderId?: string,
  ): Promise<AnnotationRecord[]> {
    const query = coderId ? `?coder_id=${encodeURIComponent(coderId)}` : "";
    return z
      .array(AnnotationRecordSchema)
      .parse(await this.getJson(`/api/sessions/${sessionId}/annotations${query}`));
  }

  async annotate(
    sessionId: string,
    payload: AnnotatePayload,
  ): Promise<AnnotateResult> {
    const res = await fetch(`${this.baseUrl}/api/sessions/${sessionId}/annotations`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(payload),
    });
    if (res.status === 422) {
      const body = (await res.json()) as { errors: Record<string, string> };
      return { ok: false, errors: body.errors };
    }
    if (!res.ok) {
      throw new ApiError(`POST annotations -> ${res.status}`, res.status);
    }
    return { ok: true, record: AnnotationRecordSchema.parse(await res.json()) };
  }
}
