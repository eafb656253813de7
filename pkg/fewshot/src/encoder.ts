/**
 * Encoder fine-tuning baseline.
 *
 * A token-embedding encoder is first pretrained on the unlabeled corpus with
 * a masked-token objective (the context is the mean of surrounding token
 * embeddings from both directions), then fine-tuned for classification with
 * cross-entropy and AdamW for a configured number of epochs. Everything is
 * seeded and CPU-sized; no downloaded weights.
 */
import { AdamW } from "./optim.js";
import { Rng, deriveSeed } from "./rng.js";
import { TextExample, hashToken, tokenize } from "./text.js";

export interface EncoderConfig {
  epochs: number;
  seed: number;
  vocabDim: number;
  embedDim: number;
  pretrainPasses: number;
  pretrainLr: number;
  maskedPerText: number;
  negativesPerMask: number;
  finetuneLr: number;
}

export const ENCODER_DEFAULTS: Omit<EncoderConfig, "epochs" | "seed"> = {
  vocabDim: 2048,
  embedDim: 48,
  pretrainPasses: 1,
  pretrainLr: 0.01,
  maskedPerText: 3,
  negativesPerMask: 5,
  finetuneLr: 0.0001,
};

export interface EncoderModel {
  kind: "encoder_finetune";
  config: EncoderConfig;
  labels: string[];
  embeddings: number[]; // vocabDim x embedDim
  headWeights: number[]; // labels x embedDim
  headBias: number[];
}

function tokenIds(text: string, vocabDim: number): number[] {
  return tokenize(text).map((t) => hashToken(t, vocabDim));
}

function meanEmbedding(
  ids: number[],
  table: Float64Array,
  embedDim: number,
  skipIndex = -1,
): Float64Array {
  const out = new Float64Array(embedDim);
  let n = 0;
  for (let i = 0; i < ids.length; i++) {
    if (i === skipIndex) continue;
    const row = ids[i] * embedDim;
    for (let j = 0; j < embedDim; j++) out[j] += table[row + j];
    n += 1;
  }
  if (n > 0) for (let j = 0; j < embedDim; j++) out[j] /= n;
  return out;
}

function pretrain(
  texts: string[],
  table: Float64Array,
  config: EncoderConfig,
): void {
  const { vocabDim, embedDim } = config;
  const optimizer = new AdamW(table.length, config.pretrainLr, 0.9, 0.999, 1e-8, 0);
  const grads = new Float64Array(table.length);
  const rng = new Rng(deriveSeed(config.seed, 0x11));
  const allIds = texts.map((t) => tokenIds(t, vocabDim));
  for (let pass = 0; pass < config.pretrainPasses; pass++) {
    for (const ids of rng.shuffle(allIds)) {
      if (ids.length < 2) continue;
      grads.fill(0);
      let touched = false;
      for (let m = 0; m < config.maskedPerText; m++) {
        const pos = rng.int(ids.length);
        const target = ids[pos];
        const context = meanEmbedding(ids, table, embedDim, pos);
        const candidates = [target];
        for (let k = 0; k < config.negativesPerMask; k++) {
          candidates.push(rng.int(vocabDim));
        }
        const scores = candidates.map((cand) => {
          let s = 0;
          const row = cand * embedDim;
          for (let j = 0; j < embedDim; j++) s += table[row + j] * context[j];
          return s;
        });
        const max = Math.max(...scores);
        const exps = scores.map((s) => Math.exp(s - max));
        const total = exps.reduce((a, b) => a + b, 0);
        const contextGrad = new Float64Array(embedDim);
        candidates.forEach((cand, k) => {
          const delta = exps[k] / total - (k === 0 ? 1 : 0);
          const row = cand * embedDim;
          for (let j = 0; j < embedDim; j++) {
            grads[row + j] += delta * context[j];
            contextGrad[j] += delta * table[row + j];
          }
        });
        const share = 1 / Math.max(1, ids.length - 1);
        for (let i = 0; i < ids.length; i++) {
          if (i === pos) continue;
          const row = ids[i] * embedDim;
          for (let j = 0; j < embedDim; j++) grads[row + j] += contextGrad[j] * share;
        }
        touched = true;
      }
      if (touched) optimizer.step(table, grads);
    }
  }
}

export function trainEncoderBaseline(
  examples: TextExample[],
  epochs: number,
  seed = 0,
  overrides: Partial<EncoderConfig> = {},
): EncoderModel {
  const labels = [...new Set(examples.map((e) => e.label))].sort();
  if (labels.length < 2) {
    throw new Error(`encoder baseline needs >= 2 classes, got ${labels.length}`);
  }
  const config: EncoderConfig = { ...ENCODER_DEFAULTS, ...overrides, epochs, seed };
  const { vocabDim, embedDim } = config;

  const rng = new Rng(deriveSeed(seed, 0x22));
  const table = new Float64Array(vocabDim * embedDim);
  for (let i = 0; i < table.length; i++) table[i] = rng.normal() * 0.05;
  pretrain(examples.map((e) => e.text), table, config);

  const nClasses = labels.length;
  const head = new Float64Array(nClasses * embedDim + nClasses);
  const headOpt = new AdamW(head.length, config.finetuneLr, 0.9, 0.999, 1e-8, 1e-4);
  const tableOpt = new AdamW(table.length, config.finetuneLr, 0.9, 0.999, 1e-8, 0);
  const headGrads = new Float64Array(head.length);
  const tableGrads = new Float64Array(table.length);
  const ids = examples.map((e) => tokenIds(e.text, vocabDim));
  const targets = examples.map((e) => labels.indexOf(e.label));

  for (let epoch = 0; epoch < epochs; epoch++) {
    const order = new Rng(deriveSeed(seed, 0x33, epoch)).shuffle(
      examples.map((_, i) => i),
    );
    for (const idx of order) {
      const tokens = ids[idx];
      if (tokens.length === 0) continue;
      const m = meanEmbedding(tokens, table, embedDim);
      const logits = new Float64Array(nClasses);
      for (let c = 0; c < nClasses; c++) {
        let s = head[nClasses * embedDim + c];
        for (let j = 0; j < embedDim; j++) s += head[c * embedDim + j] * m[j];
        logits[c] = s;
      }
      let max = -Infinity;
      for (const v of logits) max = Math.max(max, v);
      let total = 0;
      for (let c = 0; c < nClasses; c++) {
        logits[c] = Math.exp(logits[c] - max);
        total += logits[c];
      }
      headGrads.fill(0);
      tableGrads.fill(0);
      const meanGrad = new Float64Array(embedDim);
      for (let c = 0; c < nClasses; c++) {
        const delta = logits[c] / total - (c === targets[idx] ? 1 : 0);
        for (let j = 0; j < embedDim; j++) {
          headGrads[c * embedDim + j] += delta * m[j];
          meanGrad[j] += delta * head[c * embedDim + j];
        }
        headGrads[nClasses * embedDim + c] += delta;
      }
      const share = 1 / tokens.length;
      for (const id of tokens) {
        const row = id * embedDim;
        for (let j = 0; j < embedDim; j++) tableGrads[row + j] += meanGrad[j] * share;
      }
      headOpt.step(head, headGrads);
      tableOpt.step(table, tableGrads);
    }
  }

  return {
    kind: "encoder_finetune",
    config,
    labels,
    embeddings: Array.from(table),
    headWeights: Array.from(head.subarray(0, nClasses * embedDim)),
    headBias: Array.from(head.subarray(nClasses * embedDim)),
  };
}

export function predictEncoder(
  model: EncoderModel,
  text: string,
): { label: string; score: number } {
  const { vocabDim, embedDim } = model.config;
  const table = Float64Array.from(model.embeddings);
  const tokens = tokenIds(text, vocabDim);
  const m = meanEmbedding(tokens, table, embedDim);
  const nClasses = model.labels.length;
  const logits: number[] = [];
  for (let c = 0; c < nClasses; c++) {
    let s = model.headBias[c];
    for (let j = 0; j < embedDim; j++) s += model.headWeights[c * embedDim + j] * m[j];
    logits.push(s);
  }
  const max = Math.max(...logits);
  const exps = logits.map((v) => Math.exp(v - max));
  const total = exps.reduce((a, b) => a + b, 0);
  let best = 0;
  for (let c = 1; c < nClasses; c++) if (exps[c] > exps[best]) best = c;
  return { label: model.labels[best], score: exps[best] / total };
}
