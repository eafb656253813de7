/**
 * Bootstrap evaluation harness: seeded 80/20 splits, one row of metrics per
 * (configuration, iteration), medians per configuration, and the CSV export
 * the mrlens `report --eval-records` command ranks with Scott-Knott ESD.
 */
import { predictEncoder, trainEncoderBaseline } from "./encoder.js";
import { predictFewshot, trainFewshot } from "./fewshot.js";
import { Metrics, evaluate, median } from "./metrics.js";
import { Rng, deriveSeed } from "./rng.js";
import { TextExample } from "./text.js";

export interface EvalConfigSpec {
  method: "fewshot" | "encoder_finetune";
  param: number; // k per class for fewshot, epochs for the encoder baseline
}

export interface EvalRecord extends Metrics {
  method: string;
  param: number;
  iteration: number;
}

export const EVAL_CSV_HEADER = "method,param,iteration,accuracy,precision,recall,f1";

export function parseConfigs(raw: string): EvalConfigSpec[] {
  const out: EvalConfigSpec[] = [];
  for (const piece of raw.split(",")) {
    const [method, param] = piece.trim().split(":");
    if (method === "fewshot" || method === "encoder" || method === "encoder_finetune") {
      out.push({
        method: method === "encoder" ? "encoder_finetune" : method,
        param: Number(param),
      });
    } else if (piece.trim()) {
      throw new Error(`unknown configuration ${piece.trim()}`);
    }
  }
  if (out.length === 0) throw new Error("no configurations given");
  return out;
}

export function trainEvalOnce(
  train: TextExample[],
  test: TextExample[],
  spec: EvalConfigSpec,
  seed: number,
  mode: "binary" | "multiclass",
): Metrics {
  let predict: (text: string) => { label: string };
  if (spec.method === "fewshot") {
    const model = trainFewshot(train, spec.param, 5, seed);
    predict = (text) => predictFewshot(model, text);
  } else {
    const model = trainEncoderBaseline(train, spec.param, seed);
    predict = (text) => predictEncoder(model, text);
  }
  const golds = test.map((e) => e.label);
  const predictions = test.map((e) => predict(e.text).label);
  return evaluate(golds, predictions, mode);
}

export function bootstrapEval(
  examples: TextExample[],
  configs: EvalConfigSpec[],
  iterations = 10,
  seed = 0,
  mode: "binary" | "multiclass" = "binary",
): { records: EvalRecord[]; medians: Map<string, Metrics> } {
  if (examples.length < 25) {
    throw new Error(`bootstrap evaluation needs >= 25 examples, got ${examples.length}`);
  }
  const records: EvalRecord[] = [];
  for (let iteration = 0; iteration < iterations; iteration++) {
    const rng = new Rng(deriveSeed(seed, 0x808, iteration));
    const shuffled = rng.shuffle(examples);
    const cut = Math.floor(shuffled.length * 0.8);
    const train = shuffled.slice(0, cut);
    const test = shuffled.slice(cut);
    for (const spec of configs) {
      const metrics = trainEvalOnce(
        train, test, spec, deriveSeed(seed, iteration, spec.param), mode,
      );
      records.push({
        method: spec.method,
        param: spec.param,
        iteration,
        ...metrics,
      });
    }
  }
  const medians = new Map<string, Metrics>();
  for (const spec of configs) {
    const rows = records.filter(
      (r) => r.method === spec.method && r.param === spec.param,
    );
    medians.set(`${spec.method}-${spec.param}`, {
      accuracy: median(rows.map((r) => r.accuracy)),
      precision: median(rows.map((r) => r.precision)),
      recall: median(rows.map((r) => r.recall)),
      f1: median(rows.map((r) => r.f1)),
    });
  }
  return { records, medians };
}

export function recordsToCsv(records: EvalRecord[]): string {
  const lines = [EVAL_CSV_HEADER];
  for (const r of records) {
    lines.push(
      `${r.method},${r.param},${r.iteration},` +
        `${r.accuracy.toFixed(6)},${r.precision.toFixed(6)},` +
        `${r.recall.toFixed(6)},${r.f1.toFixed(6)}`,
    );
  }
  return lines.join("\n") + "\n";
}

/** Train on all of corpus A, evaluate on all of corpus B. */
export function crossCorpusEval(
  trainExamples: TextExample[],
  testExamples: TextExample[],
  spec: EvalConfigSpec,
  seed: number,
  mode: "binary" | "multiclass" = "binary",
): Metrics {
  const trainLabels = new Set(trainExamples.map((e) => e.label));
  const testLabels = new Set(testExamples.map((e) => e.label));
  for (const label of testLabels) {
    if (!trainLabels.has(label)) {
      throw new Error(`label ${label} present in test corpus but not in training`);
    }
  }
  return trainEvalOnce(trainExamples, testExamples, spec, seed, mode);
}
