// Shapes of the server's JSON. Field names follow the wire format.

export interface GenerationParams {
  temperature: number;
  top_p: number;
  frequency_penalty: number;
  max_new_tokens: number;
  seed: number;
}

export interface ParamsInput {
  temperature?: number;
  top_p?: number;
  frequency_penalty?: number;
  max_new_tokens?: number;
  seed?: number;
}

export interface SteerRequest {
  prompt: string;
  pair: { p_plus: string; p_minus: string };
  layer: number;
  coefficient: number;
  alignment?: number;
  dim_cutoff?: number;
  params?: ParamsInput;
  n_completions?: number;
  keywords?: string[];
}

export interface Completion {
  seed: number;
  text: string;
  tokens: number[];
}

export interface KeywordScore {
  counts: number[];
  spans: [number, number][][];
  mean_count: number;
  fraction: number;
}

export interface VectorInfo {
  id: string;
  spec: {
    pair: { p_plus: string; p_minus: string };
    layer: number;
    coefficient: number;
    alignment: number;
    dim_cutoff?: number | null;
  };
  model_hash: string;
  rows: number;
  modified_positions: [number, number];
  norms: number[];
}

export interface SteerReport {
  report_version: number;
  prompt: string;
  prompt_tokens: number[];
  params: GenerationParams;
  vector: VectorInfo;
  baseline: Completion[];
  steered: Completion[];
  identical: boolean;
  scores: { keywords: string[]; baseline: KeywordScore; steered: KeywordScore };
}

export interface ModelInfo {
  report_version: number;
  model: string;
  model_hash: string;
  config: {
    n_layers: number;
    d_model: number;
    n_heads: number;
    vocab_size: number;
    max_positions: number;
    layernorm_epsilon: number;
  };
  max_completions: number;
  max_concurrent: number;
  defaults: GenerationParams;
}

export interface Envelope<R> {
  request: unknown;
  seed?: number;
  timing: { elapsed_ms: number };
  report: R;
}

export interface FieldError {
  field: string;
  message: string;
}

export interface ErrorBody {
  error: { kind: string; message: string; fields?: FieldError[]; id?: string };
}
