/**
 * Few-shot contrastive sentence classifier.
 *
 * A hashed-ngram feature vector is projected into a small embedding space;
 * the projection is fine-tuned on labeled pairs (pull same-class texts
 * together, push different-class texts apart), then a softmax head is fit on
 * the embedded shots. The backbone sits behind a config key so a different
 * embedding implementation can be substituted without touching the contract.
 */
import { AdamW } from "./optim.js";
import { Rng, deriveSeed } from "./rng.js";
import { TextExample, hashedFeatures } from "./text.js";

export interface FewshotConfig {
  kPerClass: number;
  epochs: number;
  seed: number;
  backbone: "hashed-projection";
  hashDim: number;
  embedDim: number;
  margin: number;
  lr: number;
  headLr: number;
  headEpochs: number;
}

export const FEWSHOT_DEFAULTS: Omit<FewshotConfig, "kPerClass" | "seed"> = {
  epochs: 5,
  backbone: "hashed-projection",
  hashDim: 2048,
  embedDim: 64,
  margin: 0.2,
  lr: 0.01,
  headLr: 0.1,
  headEpochs: 150,
};

export interface FewshotModel {
  kind: "fewshot";
  config: FewshotConfig;
  labels: string[];
  projection: number[]; // hashDim x embedDim, row-major
  headWeights: number[]; // labels x embedDim
  headBias: number[];
}

function projectionAt(model: { hashDim: number; embedDim: number }, pFlat: Float64Array, x: Float64Array): Float64Array {
  const { hashDim, embedDim } = model;
  const u = new Float64Array(embedDim);
  for (let i = 0; i < hashDim; i++) {
    const xi = x[i];
    if (xi === 0) continue;
    const row = i * embedDim;
    for (let j = 0; j < embedDim; j++) u[j] += xi * pFlat[row + j];
  }
  return u;
}

function l2normalize(u: Float64Array): { e: Float64Array; norm: number } {
  let norm = 0;
  for (let j = 0; j < u.length; j++) norm += u[j] * u[j];
  norm = Math.sqrt(norm) || 1e-12;
  const e = new Float64Array(u.length);
  for (let j = 0; j < u.length; j++) e[j] = u[j] / norm;
  return { e, norm };
}

function dot(a: Float64Array, b: Float64Array): number {
  let s = 0;
  for (let i = 0; i < a.length; i++) s += a[i] * b[i];
  return s;
}

export function selectShots(
  examples: TextExample[],
  kPerClass: number,
  seed: number,
): TextExample[] {
  const byLabel = new Map<string, TextExample[]>();
  for (const ex of examples) {
    const bucket = byLabel.get(ex.label) ?? [];
    bucket.push(ex);
    byLabel.set(ex.label, bucket);
  }
  if (kPerClass < 1) throw new Error("k per class must be >= 1");
  const rng = new Rng(deriveSeed(seed, 0xfacade));
  const shots: TextExample[] = [];
  for (const label of [...byLabel.keys()].sort()) {
    const pool = byLabel.get(label)!;
    if (pool.length < kPerClass) {
      throw new Error(
        `class ${label} has only ${pool.length} examples; need ${kPerClass}`,
      );
    }
    shots.push(...rng.sample(pool, kPerClass));
  }
  return shots;
}

interface Pair {
  a: number;
  b: number;
  same: boolean;
}

function buildPairs(labels: string[], rng: Rng): Pair[] {
  const pairs: Pair[] = [];
  const negatives: Pair[] = [];
  for (let i = 0; i < labels.length; i++) {
    for (let j = i + 1; j < labels.length; j++) {
      if (labels[i] === labels[j]) pairs.push({ a: i, b: j, same: true });
      else negatives.push({ a: i, b: j, same: false });
    }
  }
  // Balance: keep as many negatives as positives (sampled without replacement).
  const keep = Math.min(negatives.length, Math.max(pairs.length, 1));
  pairs.push(...rng.sample(negatives, keep));
  return pairs;
}

export function trainFewshot(
  examples: TextExample[],
  kPerClass: number,
  epochs = FEWSHOT_DEFAULTS.epochs,
  seed = 0,
  overrides: Partial<FewshotConfig> = {},
): FewshotModel {
  const config: FewshotConfig = {
    ...FEWSHOT_DEFAULTS,
    ...overrides,
    kPerClass,
    epochs,
    seed,
  };
  const shots = selectShots(examples, kPerClass, seed);
  const labels = [...new Set(shots.map((s) => s.label))].sort();
  const { hashDim, embedDim } = config;

  const features = shots.map((s) => hashedFeatures(s.text, hashDim));
  const rng = new Rng(deriveSeed(seed, 0x5e77));
  const projection = new Float64Array(hashDim * embedDim);
  for (let i = 0; i < projection.length; i++) {
    projection[i] = rng.normal() / Math.sqrt(hashDim);
  }

  // Contrastive fine-tuning of the projection.
  const optimizer = new AdamW(projection.length, config.lr, 0.9, 0.999, 1e-8, 0);
  const grads = new Float64Array(projection.length);
  const dims = { hashDim, embedDim };
  for (let epoch = 0; epoch < epochs; epoch++) {
    const pairRng = new Rng(deriveSeed(seed, 0xbeef, epoch));
    const pairs = pairRng.shuffle(buildPairs(shots.map((s) => s.label), pairRng));
    for (const pair of pairs) {
      const xa = features[pair.a];
      const xb = features[pair.b];
      const ua = projectionAt(dims, projection, xa);
      const ub = projectionAt(dims, projection, xb);
      const na = l2normalize(ua);
      const nb = l2normalize(ub);
      const cos = dot(na.e, nb.e);
      let dCos: number;
      if (pair.same) {
        dCos = -1; // loss = 1 - cos
      } else if (cos > config.margin) {
        dCos = 1; // loss = cos - margin
      } else {
        continue;
      }
      grads.fill(0);
      // d cos / d u_a = (e_b - cos * e_a) / |u_a|, symmetric for u_b.
      for (let j = 0; j < embedDim; j++) {
        const ga = (dCos * (nb.e[j] - cos * na.e[j])) / na.norm;
        const gb = (dCos * (na.e[j] - cos * nb.e[j])) / nb.norm;
        for (let i = 0; i < hashDim; i++) {
          const row = i * embedDim + j;
          if (xa[i] !== 0) grads[row] += xa[i] * ga;
          if (xb[i] !== 0) grads[row] += xb[i] * gb;
        }
      }
      optimizer.step(projection, grads);
    }
  }

  // Softmax head on the embedded shots.
  const embedded = features.map((x) => l2normalize(projectionAt(dims, projection, x)).e);
  const head = trainSoftmaxHead(embedded, shots.map((s) => labels.indexOf(s.label)),
    labels.length, config.headLr, config.headEpochs, deriveSeed(seed, 0x0ead));

  return {
    kind: "fewshot",
    config,
    labels,
    projection: Array.from(projection),
    headWeights: Array.from(head.weights),
    headBias: Array.from(head.bias),
  };
}

function trainSoftmaxHead(
  embeddings: Float64Array[],
  targets: number[],
  nClasses: number,
  lr: number,
  epochs: number,
  seed: number,
): { weights: Float64Array; bias: Float64Array } {
  const dim = embeddings[0].length;
  const weights = new Float64Array(nClasses * dim);
  const bias = new Float64Array(nClasses);
  const optimizer = new AdamW(weights.length + nClasses, lr, 0.9, 0.999, 1e-8, 1e-4);
  const params = new Float64Array(weights.length + nClasses);
  const grads = new Float64Array(params.length);
  const rng = new Rng(seed);
  for (let epoch = 0; epoch < epochs; epoch++) {
    const order = rng.shuffle(embeddings.map((_, i) => i));
    grads.fill(0);
    for (const idx of order) {
      const e = embeddings[idx];
      const probs = softmaxLogits(params, e, nClasses, dim);
      for (let c = 0; c < nClasses; c++) {
        const delta = probs[c] - (c === targets[idx] ? 1 : 0);
        for (let j = 0; j < dim; j++) grads[c * dim + j] += delta * e[j];
        grads[weights.length + c] += delta;
      }
    }
    for (let i = 0; i < grads.length; i++) grads[i] /= embeddings.length;
    optimizer.step(params, grads);
  }
  weights.set(params.subarray(0, weights.length));
  bias.set(params.subarray(weights.length));
  return { weights, bias };
}

function softmaxLogits(
  params: Float64Array,
  e: Float64Array,
  nClasses: number,
  dim: number,
): Float64Array {
  const logits = new Float64Array(nClasses);
  for (let c = 0; c < nClasses; c++) {
    let s = params[params.length - nClasses + c];
    for (let j = 0; j < dim; j++) s += params[c * dim + j] * e[j];
    logits[c] = s;
  }
  let max = -Infinity;
  for (const v of logits) max = Math.max(max, v);
  let total = 0;
  for (let c = 0; c < nClasses; c++) {
    logits[c] = Math.exp(logits[c] - max);
    total += logits[c];
  }
  for (let c = 0; c < nClasses; c++) logits[c] /= total;
  return logits;
}

export function predictFewshot(
  model: FewshotModel,
  text: string,
): { label: string; score: number } {
  const { hashDim, embedDim } = model.config;
  const projection = Float64Array.from(model.projection);
  const x = hashedFeatures(text, hashDim);
  const { e } = l2normalize(projectionAt({ hashDim, embedDim }, projection, x));
  const nClasses = model.labels.length;
  const params = new Float64Array(nClasses * embedDim + nClasses);
  params.set(model.headWeights);
  params.set(model.headBias, nClasses * embedDim);
  const probs = softmaxLogits(params, e, nClasses, embedDim);
  let best = 0;
  for (let c = 1; c < nClasses; c++) if (probs[c] > probs[best]) best = c;
  return { label: model.labels[best], score: probs[best] };
}
