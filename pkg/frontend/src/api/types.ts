import { z } from "zod";

export const SessionBody = z.object({
  session_id: z.string(),
  state: z.string(),
  corpus_id: z.string().nullable(),
  model_id: z.string().nullable(),
  table_id: z.string().nullable(),
});
export type SessionBody = z.infer<typeof SessionBody>;

export const PaperRecord = z.object({
  record_id: z.string(),
  title: z.string(),
  doi: z.string().nullable(),
  abstract: z.string().nullable(),
  authors: z.array(z.string()),
  year: z.number().nullable(),
  venue: z.string().nullable(),
  open_access: z.boolean().nullable(),
  fulltext_url: z.string().nullable(),
  provenance: z.array(z.tuple([z.string(), z.string()])),
});
export type PaperRecord = z.infer<typeof PaperRecord>;

export const SearchResponse = z.object({
  records: z.array(PaperRecord),
  per_connector_status: z.record(
    z.string(),
    z.object({ status: z.string(), detail: z.unknown() }),
  ),
  dedup_report: z.array(z.array(z.string())),
  session: SessionBody,
});
export type SearchResponse = z.infer<typeof SearchResponse>;

export const CellValue = z.union([
  z.object({ kind: z.literal("found"), text: z.string() }),
  z.object({ kind: z.literal("not_found") }),
]);
export type CellValue = z.infer<typeof CellValue>;

export const Annotation = z.object({
  surface_form: z.string(),
  kg: z.string(),
  candidate_uri: z.string(),
  char_range: z.tuple([z.number(), z.number()]),
});
export type Annotation = z.infer<typeof Annotation>;

export const Cell = z.object({
  property_name: z.string(),
  value: CellValue,
  state: z.string(),
  source_model_version: z.number(),
  history: z.array(
    z.object({
      timestamp: z.number(),
      actor: z.string(),
      old_value: CellValue,
      new_value: CellValue,
    }),
  ),
  annotations: z.array(Annotation),
});
export type Cell = z.infer<typeof Cell>;

export const TableRow = z.object({
  row_id: z.string(),
  title: z.string(),
  doi: z.string().nullable(),
  error: z.string().nullable(),
  included: z.boolean(),
  text_source: z.string(),
  cells: z.array(Cell),
});
export type TableRow = z.infer<typeof TableRow>;

export const TableDoc = z.object({
  schema_version: z.number(),
  table_id: z.string(),
  corpus_id: z.string(),
  model_version: z.number(),
  created_at: z.number(),
  preprocess_version: z.string(),
  template_version: z.string(),
  properties: z.array(
    z.object({
      name: z.string(),
      description: z.string().nullable(),
      expected_kind: z.string(),
    }),
  ),
  rows: z.array(TableRow),
});
export type TableDoc = z.infer<typeof TableDoc>;

export const CellPatchResponse = z.object({
  row_id: z.string(),
  property_name: z.string(),
  value: CellValue,
  state: z.string(),
});
export type CellPatchResponse = z.infer<typeof CellPatchResponse>;

export const JobStatus = z.object({
  job_id: z.string(),
  session_id: z.string(),
  status: z.enum(["pending", "running", "succeeded", "failed"]),
  table_id: z.string().nullable().optional(),
  error: z.string().nullable().optional(),
});
export type JobStatus = z.infer<typeof JobStatus>;

export const ModelResponse = z.object({
  model_id: z.string(),
  version: z.number(),
  properties: z.array(z.string()),
  session: SessionBody,
});
export type ModelResponse = z.infer<typeof ModelResponse>;

export const ApiErrorBody = z.object({
  code: z.string(),
  message: z.string(),
});
export type ApiErrorBody = z.infer<typeof ApiErrorBody>;
