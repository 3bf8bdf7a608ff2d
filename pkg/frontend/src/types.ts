/** Wire types for the /v1 forecast API plus UI-side session shapes. */

export interface StrokeInput {
  t: number;
  locationA: [number, number];
  locationB: [number, number];
  shotType: string;
}

export interface ForecastRequest {
  playerA: string;
  playerB: string;
  prefix: StrokeInput[];
  horizon: number;
  nSamples: number;
  seed?: number;
}

export interface GaussianParams {
  muX: number;
  muY: number;
  sigmaX: number;
  sigmaY: number;
  rho: number;
}

export interface ForecastStep {
  k: number;
  shotDistribution: number[];
  chosenShot: string;
  gaussians: { playerA: GaussianParams; playerB: GaussianParams };
  samples: Array<{ playerA: [number, number]; playerB: [number, number] }>;
}

export interface ForecastResponse {
  seed: number;
  horizon: number;
  nSamples: number;
  warnings: string[];
  steps: ForecastStep[];
}

export interface CourtBounds {
  width: number;
  length: number;
}

export interface Meta {
  players: string[];
  shotTypes: string[];
  serveTypes: string[];
  courtBounds: CourtBounds;
  checkpointInfo: {
    source: string;
    variant: string;
    parameters: number;
    players: number;
  };
}

export interface ApiErrorBody {
  error: string;
  fields?: Record<string, string>;
}

/** One submitted request together with the response it produced. */
export interface Exchange {
  request: ForecastRequest;
  response: ForecastResponse;
}

export type Side = "a" | "b";

export interface ValidationIssue {
  field: string;
  message: string;
}
