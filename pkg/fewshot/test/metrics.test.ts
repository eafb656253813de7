import { describe, expect, it } from "vitest";
import { evaluate, median } from "../src/metrics.js";

describe("evaluate (binary)", () => {
  it("perfect predictions give 1.0 across the board", () => {
    const labels = ["DEVIATION", "NORMAL", "DEVIATION"];
    const m = evaluate(labels, labels, "binary");
    expect(m).toEqual({ accuracy: 1, precision: 1, recall: 1, f1: 1 });
  });

  it("all-negative predictions on a balanced set", () => {
    const golds = ["DEVIATION", "NORMAL", "DEVIATION", "NORMAL"];
    const preds = ["NORMAL", "NORMAL", "NORMAL", "NORMAL"];
    const m = evaluate(golds, preds, "binary");
    expect(m.accuracy).toBe(0.5);
    expect(m.recall).toBe(0);
    expect(m.f1).toBe(0);
  });

  it("matches the worked confusion matrix", () => {
    // TP 9, FP 3, FN 1, TN 7
    const golds = [
      ...Array(9).fill("DEVIATION"),
      ...Array(3).fill("NORMAL"),
      ...Array(1).fill("DEVIATION"),
      ...Array(7).fill("NORMAL"),
    ];
    const preds = [
      ...Array(9).fill("DEVIATION"),
      ...Array(3).fill("DEVIATION"),
      ...Array(1).fill("NORMAL"),
      ...Array(7).fill("NORMAL"),
    ];
    const m = evaluate(golds, preds, "binary");
    expect(m.precision).toBeCloseTo(0.75, 10);
    expect(m.recall).toBeCloseTo(0.9, 10);
    expect(m.f1).toBeCloseTo(0.8181818, 5);
    expect(m.accuracy).toBeCloseTo(16 / 20, 10);
  });

  it("keeps the f1 identity when p + r > 0", () => {
    const golds = ["DEVIATION", "DEVIATION", "NORMAL", "NORMAL", "DEVIATION"];
    const preds = ["DEVIATION", "NORMAL", "DEVIATION", "NORMAL", "DEVIATION"];
    const m = evaluate(golds, preds, "binary");
    expect(m.f1).toBeCloseTo(
      (2 * m.precision * m.recall) / (m.precision + m.recall),
      12,
    );
  });
});

describe("evaluate (multiclass)", () => {
  it("macro-averages across gold classes", () => {
    const golds = ["LU", "LU", "CC", "NORMAL"];
    const preds = ["LU", "CC", "CC", "NORMAL"];
    const m = evaluate(golds, preds, "multiclass");
    expect(m.accuracy).toBe(0.75);
    // per-class precision: LU 1, CC 0.5, NORMAL 1 -> macro 2.5/3
    expect(m.precision).toBeCloseTo(2.5 / 3, 10);
  });
});

describe("median", () => {
  it("odd count takes the middle order statistic", () => {
    expect(median([0.9, 0.1, 0.5])).toBe(0.5);
  });

  it("even count averages the middle two", () => {
    expect(median([1, 2, 3, 10])).toBe(2.5);
  });
});
