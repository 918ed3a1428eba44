import {
  CellPatchResponse,
  JobStatus,
  ModelResponse,
  SearchResponse,
  SessionBody,
  TableDoc,
} from "./types";

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
  ) {
    super(message);
  }
}

export type FetchLike = typeof fetch;

/** Thin typed wrapper over the workflow-service HTTP API. Holds no state. */
export class ApiClient {
  constructor(
    private readonly baseUrl: string = "",
    private readonly fetchImpl: FetchLike = (...args) => fetch(...args),
  ) {}

  private async request(path: string, init?: RequestInit): Promise<unknown> {
    const response = await this.fetchImpl(`${this.baseUrl}${path}`, {
      headers: init?.body ? { "Content-Type": "application/json" } : undefined,
      ...init,
    });
    if (!response.ok) {
      const body = (await response.json().catch(() => ({}))) as {
        code?: string;
        message?: string;
      };
      throw new ApiError(
        response.status,
        body.code ?? "unknown",
        body.message ?? response.statusText,
      );
    }
    return response.json();
  }

  createSession(): Promise<SessionBody> {
    return this.request("/api/sessions", { method: "POST" }).then((d) =>
      SessionBody.parse(d),
    );
  }

  getSession(sessionId: string): Promise<SessionBody> {
    return this.request(`/api/sessions/${sessionId}`).then((d) =>
      SessionBody.parse(d),
    );
  }

  async suggestKeywords(sessionId: string, interest: string): Promise<string[]> {
    const data = (await this.request(`/api/sessions/${sessionId}/keywords`, {
      method: "POST",
      body: JSON.stringify({ interest }),
    })) as { keywords: string[] };
    return data.keywords;
  }

  search(
    sessionId: string,
    body: {
      query: string;
      connector_ids?: string[];
      limit?: number;
      open_access_only?: boolean;
    },
  ): Promise<SearchResponse> {
    return this.request(`/api/sessions/${sessionId}/search`, {
      method: "POST",
      body: JSON.stringify(body),
    }).then((d) => SearchResponse.parse(d));
  }

  selectRecords(
    sessionId: string,
    recordIds: string[],
  ): Promise<{ corpus_id: string; entry_count: number }> {
    return this.request(`/api/sessions/${sessionId}/corpus/selection`, {
      method: "POST",
      body: JSON.stringify({ record_ids: recordIds }),
    }) as Promise<{ corpus_id: string; entry_count: number }>;
  }

  fetchDocuments(
    sessionId: string,
  ): Promise<{ fetched: number; failed: number }> {
    return this.request(`/api/sessions/${sessionId}/corpus/fetch`, {
      method: "POST",
    }) as Promise<{ fetched: number; failed: number }>;
  }

  putModel(
    sessionId: string,
    properties: { name: string; description?: string }[],
  ): Promise<ModelResponse> {
    return this.request(`/api/sessions/${sessionId}/model`, {
      method: "PUT",
      body: JSON.stringify({ properties }),
    }).then((d) => ModelResponse.parse(d));
  }

  async startExtraction(sessionId: string): Promise<string> {
    const data = (await this.request(`/api/sessions/${sessionId}/extract`, {
      method: "POST",
    })) as { job_id: string };
    return data.job_id;
  }

  getJob(jobId: string): Promise<JobStatus> {
    return this.request(`/api/jobs/${jobId}`).then((d) => JobStatus.parse(d));
  }

  getTable(tableId: string): Promise<TableDoc> {
    return this.request(`/api/tables/${tableId}`).then((d) =>
      TableDoc.parse(d),
    );
  }

  patchCell(
    tableId: string,
    rowId: string,
    prop: string,
    body: { value: string } | { validated: boolean } | { reextract: true },
  ): Promise<CellPatchResponse> {
    return this.request(
      `/api/tables/${tableId}/cells/${rowId}/${encodeURIComponent(prop)}`,
      { method: "PATCH", body: JSON.stringify(body) },
    ).then((d) => CellPatchResponse.parse(d));
  }

  patchRow(
    tableId: string,
    rowId: string,
    included: boolean,
  ): Promise<{ row_id: string; included: boolean }> {
    return this.request(`/api/tables/${tableId}/rows/${rowId}`, {
      method: "PATCH",
      body: JSON.stringify({ included }),
    }) as Promise<{ row_id: string; included: boolean }>;
  }

  annotate(tableId: string): Promise<{ annotation_count: number }> {
    return this.request(`/api/tables/${tableId}/annotations`, {
      method: "POST",
    }) as Promise<{ annotation_count: number }>;
  }

  exportUrl(tableId: string, format: "csv" | "json"): string {
    return `${this.baseUrl}/api/tables/${tableId}/export?format=${format}`;
  }
}
