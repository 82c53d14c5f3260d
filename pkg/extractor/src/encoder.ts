/** Deterministic transformer sentence encoder.
 *
 * The architecture is the standard 12-layer, 768-hidden, 12-head
 * bidirectional encoder with a GELU feed-forward block. This sandbox has
 * no access to pretrained weight downloads, so weights are drawn from a
 * seeded generator instead: embeddings are not semantically meaningful,
 * but every output-contract property (dimension, determinism, row order,
 * pooling semantics) behaves exactly as with real weights.
 */

import { Rng } from "./prng";
import { encodeSentence } from "./tokenizer";

export interface ModelSpec {
  layers: number;
  hidden: number;
  heads: number;
  ffn: number;
  vocab: number;
  maxPositions: number;
}

export const MODELS: Record<string, ModelSpec> = {
  "bert-base": {
    layers: 12,
    hidden: 768,
    heads: 12,
    ffn: 3072,
    vocab: 4096,
    maxPositions: 512,
  },
};

export const POOLINGS = ["cls", "mean_second_to_last"] as const;
export type Pooling = (typeof POOLINGS)[number];

export interface ExtractConfig {
  model: string;
  pooling: Pooling;
  maxLen: number;
  batchSize: number;
  seed: number;
}

export function resolveConfig(partial: Partial<ExtractConfig> = {}): ExtractConfig {
  const cfg: ExtractConfig = {
    model: "bert-base",
    pooling: "mean_second_to_last",
    maxLen: 128,
    batchSize: 32,
    seed: 0,
    ...partial,
  };
  if (!(cfg.model in MODELS)) {
    throw new Error(`unknown model ${JSON.stringify(cfg.model)}`);
  }
  if (!POOLINGS.includes(cfg.pooling)) {
    throw new Error(`pooling must be one of ${POOLINGS.join(", ")}`);
  }
  const spec = MODELS[cfg.model];
  if (cfg.maxLen < 3 || cfg.maxLen > spec.maxPositions) {
    throw new Error(`maxLen must be in [3, ${spec.maxPositions}]`);
  }
  if (cfg.batchSize < 1) throw new Error("batchSize must be >= 1");
  return cfg;
}

const INIT_STD = 0.02;
const LN_EPS = 1e-12;

interface LayerWeights {
  wq: Float32Array; // [hidden][hidden], transposed: row = output unit
  wk: Float32Array;
  wv: Float32Array;
  wo: Float32Array;
  w1: Float32Array; // [ffn][hidden]
  w2: Float32Array; // [hidden][ffn]
}

/** y[L x outDim] = x[L x inDim] . wT[outDim x inDim]^T (4-way unrolled). */
function linear(
  x: Float64Array,
  rows: number,
  inDim: number,
  wT: Float32Array,
  outDim: number,
  out: Float64Array,
): void {
  for (let i = 0; i < rows; i++) {
    const xoff = i * inDim;
    const yoff = i * outDim;
    for (let j = 0; j < outDim; j++) {
      const woff = j * inDim;
      let a0 = 0;
      let a1 = 0;
      let a2 = 0;
      let a3 = 0;
      for (let k = 0; k < inDim; k += 4) {
        a0 += x[xoff + k] * wT[woff + k];
        a1 += x[xoff + k + 1] * wT[woff + k + 1];
        a2 += x[xoff + k + 2] * wT[woff + k + 2];
        a3 += x[xoff + k + 3] * wT[woff + k + 3];
      }
      out[yoff + j] = a0 + a1 + (a2 + a3);
    }
  }
}

/** In-place residual add then per-row layer normalization (identity affine). */
function addAndNormalize(
  residual: Float64Array,
  delta: Float64Array,
  rows: number,
  dim: number,
): void {
  for (let i = 0; i < rows; i++) {
    const off = i * dim;
    let mean = 0;
    for (let j = 0; j < dim; j++) {
      residual[off + j] += delta[off + j];
      mean += residual[off + j];
    }
    mean /= dim;
    let variance = 0;
    for (let j = 0; j < dim; j++) {
      const d = residual[off + j] - mean;
      variance += d * d;
    }
    variance /= dim;
    const inv = 1 / Math.sqrt(variance + LN_EPS);
    for (let j = 0; j < dim; j++) {
      residual[off + j] = (residual[off + j] - mean) * inv;
    }
  }
}

function gelu(x: number): number {
  // tanh approximation of the Gaussian error linear unit
  return 0.5 * x * (1 + Math.tanh(0.7978845608028654 * (x + 0.044715 * x * x * x)));
}

export class Encoder {
  readonly spec: ModelSpec;
  private readonly tokenEmb: Float32Array;
  private readonly posEmb: Float32Array;
  private readonly layers: LayerWeights[];
  private readonly cache = new Map<string, Float32Array>();

  constructor(spec: ModelSpec, seed: number) {
    this.spec = spec;
    const draw = (stream: number, size: number): Float32Array => {
      const arr = new Float32Array(size);
      new Rng(seed, stream).fillNormal(arr, INIT_STD);
      return arr;
    };
    const h = spec.hidden;
    this.tokenEmb = draw(1, spec.vocab * h);
    this.posEmb = draw(2, spec.maxPositions * h);
    this.layers = [];
    for (let l = 0; l < spec.layers; l++) {
      const base = 100 + l * 8;
      this.layers.push({
        wq: draw(base, h * h),
        wk: draw(base + 1, h * h),
        wv: draw(base + 2, h * h),
        wo: draw(base + 3, h * h),
        w1: draw(base + 4, spec.ffn * h),
        w2: draw(base + 5, h * spec.ffn),
      });
    }
  }

  /** Hidden states per depth: index 0 is the embedding output, index
   *  `layers` the final layer. Each entry is rows x hidden. */
  hiddenStates(ids: number[]): Float64Array[] {
    const { hidden: h, heads } = this.spec;
    const L = ids.length;
    const headDim = h / heads;
    const scale = 1 / Math.sqrt(headDim);

    const state = new Float64Array(L * h);
    for (let i = 0; i < L; i++) {
      const tok = ids[i] * h;
      const pos = i * h;
      for (let j = 0; j < h; j++) {
        state[i * h + j] = this.tokenEmb[tok + j] + this.posEmb[pos + j];
      }
    }
    addAndNormalize(state, new Float64Array(L * h), L, h);

    const states: Float64Array[] = [state.slice()];
    const q = new Float64Array(L * h);
    const k = new Float64Array(L * h);
    const v = new Float64Array(L * h);
    const ctx = new Float64Array(L * h);
    const attnOut = new Float64Array(L * h);
    const ffnMid = new Float64Array(L * this.spec.ffn);
    const ffnOut = new Float64Array(L * h);
    const scores = new Float64Array(L);

    for (const w of this.layers) {
      linear(state, L, h, w.wq, h, q);
      linear(state, L, h, w.wk, h, k);
      linear(state, L, h, w.wv, h, v);

      ctx.fill(0);
      for (let head = 0; head < heads; head++) {
        const d0 = head * headDim;
        for (let i = 0; i < L; i++) {
          let max = -Infinity;
          for (let j = 0; j < L; j++) {
            let dot = 0;
            for (let t = 0; t < headDim; t++) {
              dot += q[i * h + d0 + t] * k[j * h + d0 + t];
            }
            scores[j] = dot * scale;
            if (scores[j] > max) max = scores[j];
          }
          let norm = 0;
          for (let j = 0; j < L; j++) {
            scores[j] = Math.exp(scores[j] - max);
            norm += scores[j];
          }
          for (let j = 0; j < L; j++) {
            const alpha = scores[j] / norm;
            for (let t = 0; t < headDim; t++) {
              ctx[i * h + d0 + t] += alpha * v[j * h + d0 + t];
            }
          }
        }
      }
      linear(ctx, L, h, w.wo, h, attnOut);
      addAndNormalize(state, attnOut, L, h);

      linear(state, L, h, w.w1, this.spec.ffn, ffnMid);
      for (let i = 0; i < ffnMid.length; i++) ffnMid[i] = gelu(ffnMid[i]);
      linear(ffnMid, L, this.spec.ffn, w.w2, h, ffnOut);
      addAndNormalize(state, ffnOut, L, h);

      states.push(state.slice());
    }
    return states;
  }

  /** One pooled 768-dim row for a sentence, cached by token sequence. */
  encodeRow(text: string, maxLen: number, pooling: Pooling): {
    row: Float32Array;
    truncated: boolean;
  } {
    const { ids, truncated } = encodeSentence(text, this.spec.vocab, maxLen);
    const key = `${pooling}:${ids.join(",")}`;
    const hit = this.cache.get(key);
    if (hit) return { row: hit, truncated };

    const states = this.hiddenStates(ids);
    const h = this.spec.hidden;
    const row = new Float32Array(h);
    if (pooling === "cls") {
      const final = states[states.length - 1];
      for (let j = 0; j < h; j++) row[j] = Math.fround(final[j]);
    } else {
      // average every token position of the second-to-last layer
      const layer = states[states.length - 2];
      const L = ids.length;
      for (let j = 0; j < h; j++) {
        let sum = 0;
        for (let i = 0; i < L; i++) sum += layer[i * h + j];
        row[j] = Math.fround(sum / L);
      }
    }
    this.cache.set(key, row);
    return { row, truncated };
  }
}

const encoderCache = new Map<string, Encoder>();

/** Encoders are pure given (model, seed), so instances are shared. */
export function getEncoder(model: string, seed: number): Encoder {
  const key = `${model}:${seed}`;
  let enc = encoderCache.get(key);
  if (!enc) {
    enc = new Encoder(MODELS[model], seed);
    encoderCache.set(key, enc);
  }
  return enc;
}
