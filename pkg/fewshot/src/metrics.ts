/**
 * Classification metrics. Binary mode treats any deviation category as the
 * positive class; multiclass mode reports macro averages.
 */
import { NORMAL_LABEL } from "./text.js";

export interface Metrics {
  accuracy: number;
  precision: number;
  recall: number;
  f1: number;
}

function f1Of(precision: number, recall: number): number {
  return precision + recall > 0
    ? (2 * precision * recall) / (precision + recall)
    : 0;
}

export function evaluate(
  golds: string[],
  predictions: string[],
  mode: "binary" | "multiclass",
): Metrics {
  if (golds.length === 0 || golds.length !== predictions.length) {
    throw new Error("evaluate needs non-empty, equal-length label vectors");
  }
  const correct = golds.filter((g, i) => g === predictions[i]).length;
  const accuracy = correct / golds.length;

  if (mode === "binary") {
    let tp = 0;
    let fp = 0;
    let fn = 0;
    for (let i = 0; i < golds.length; i++) {
      const goldPos = golds[i] !== NORMAL_LABEL;
      const predPos = predictions[i] !== NORMAL_LABEL;
      if (goldPos && predPos) tp += 1;
      else if (!goldPos && predPos) fp += 1;
      else if (goldPos && !predPos) fn += 1;
    }
    const precision = tp + fp > 0 ? tp / (tp + fp) : 0;
    const recall = tp + fn > 0 ? tp / (tp + fn) : 0;
    return { accuracy, precision, recall, f1: f1Of(precision, recall) };
  }

  const classes = [...new Set(golds)].sort();
  let precisionSum = 0;
  let recallSum = 0;
  let f1Sum = 0;
  for (const cls of classes) {
    let tp = 0;
    let fp = 0;
    let fn = 0;
    for (let i = 0; i < golds.length; i++) {
      if (golds[i] === cls && predictions[i] === cls) tp += 1;
      else if (golds[i] !== cls && predictions[i] === cls) fp += 1;
      else if (golds[i] === cls && predictions[i] !== cls) fn += 1;
    }
    const precision = tp + fp > 0 ? tp / (tp + fp) : 0;
    const recall = tp + fn > 0 ? tp / (tp + fn) : 0;
    precisionSum += precision;
    recallSum += recall;
    f1Sum += f1Of(precision, recall);
  }
  return {
    accuracy,
    precision: precisionSum / classes.length,
    recall: recallSum / classes.length,
    f1: f1Sum / classes.length,
  };
}

export function median(values: number[]): number {
  if (values.length === 0) throw new Error("median of empty list");
  const sorted = [...values].sort((a, b) => a - b);
  const mid = Math.floor(sorted.length / 2);
  return sorted.length % 2 === 1 ? sorted[mid] : (sorted[mid - 1] + sorted[mid]) / 2;
}
