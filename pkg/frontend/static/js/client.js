/** Thin typed client for the /v1 endpoints. */
export class ApiError extends Error {
    status;
    fields;
    constructor(status, message, fields) {
        super(message);
        this.status = status;
        this.fields = fields;
    }
}
async function errorFrom(resp) {
    let body = null;
    try {
        body = (await resp.json());
    }
    catch {
        // non-JSON error body; fall through to the status line
    }
    const detail = body?.fields
        ? Object.entries(body.fields).map(([k, v]) => `${k}: ${v}`).join("; ")
        : body?.error ?? resp.statusText;
    return new ApiError(resp.status, detail, body?.fields);
}
export class ForecastClient {
    baseUrl;
    fetchFn;
    constructor(baseUrl = "", fetchFn = (...args) => fetch(...args)) {
        this.baseUrl = baseUrl;
        this.fetchFn = fetchFn;
    }
    async health() {
        const resp = await this.fetchFn(`${this.baseUrl}/v1/health`);
        if (!resp.ok)
            throw await errorFrom(resp);
        return (await resp.json());
    }
    async meta() {
        const resp = await this.fetchFn(`${this.baseUrl}/v1/meta`);
        if (!resp.ok)
            throw await errorFrom(resp);
        return (await resp.json());
    }
    async forecast(request) {
        const resp = await this.fetchFn(`${this.baseUrl}/v1/forecast`, {
            method: "POST",
            headers: { "Content-Type": "application/json" },
            body: JSON.stringify(request),
        });
        if (!resp.ok)
            throw await errorFrom(resp);
        return (await resp.json());
    }
}
