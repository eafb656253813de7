/**
 * Secondary acceptance criteria: few-shot accuracy and monotone k, the
 * encoder epoch trend, and protocol conformance (covered in serve.test.ts,
 * re-asserted here end to end through the CLI service).
 */
import { execFileSync, spawn } from "node:child_process";
import { existsSync, mkdtempSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { beforeAll, describe, expect, it } from "vitest";
import { bootstrapEval, parseConfigs } from "../src/bootstrap.js";
import { makeSyntheticCorpus, writeSyntheticArchive } from "../src/synth.js";
import { TextExample, buildExamples } from "../src/text.js";

let examples: TextExample[];

beforeAll(() => {
  const corpus = makeSyntheticCorpus(300, 1);
  examples = buildExamples(corpus.records, corpus.labels, { binary: true });
});

describe("acceptance", () => {
  it("few-shot reaches 0.95 at k=15 and medians are non-decreasing in k", () => {
    const { medians } = bootstrapEval(
      examples,
      parseConfigs("fewshot:5,fewshot:10,fewshot:15"),
      10,
      0,
      "binary",
    );
    const acc5 = medians.get("fewshot-5")!.accuracy;
    const acc10 = medians.get("fewshot-10")!.accuracy;
    const acc15 = medians.get("fewshot-15")!.accuracy;
    console.log(`[fewshot medians] k=5 ${acc5} k=10 ${acc10} k=15 ${acc15}`);
    expect(acc15).toBeGreaterThanOrEqual(0.95);
    expect(acc10).toBeGreaterThanOrEqual(acc5);
    expect(acc15).toBeGreaterThanOrEqual(acc10);
  });

  it("encoder baseline: 5-epoch median accuracy >= 3-epoch median", () => {
    const { medians } = bootstrapEval(
      examples,
      parseConfigs("encoder:3,encoder:5"),
      10,
      0,
      "binary",
    );
    const acc3 = medians.get("encoder_finetune-3")!.accuracy;
    const acc5 = medians.get("encoder_finetune-5")!.accuracy;
    console.log(`[encoder medians] 3 epochs ${acc3}, 5 epochs ${acc5}`);
    expect(acc5).toBeGreaterThanOrEqual(acc3);
  });
});

describe("cross-stack integration (requires the Python CLI)", () => {
  it("mrlens classify --backend service streams through this package", () => {
    let mrlensAvailable = true;
    try {
      execFileSync("python3", ["-c", "import mrlens"], { stdio: "ignore" });
    } catch {
      mrlensAvailable = false;
    }
    if (!mrlensAvailable || !existsSync(join(__dirname, "..", "dist", "cli.js"))) {
      console.log("skipping: python mrlens or built dist/ not available");
      return;
    }
    const dir = mkdtempSync(join(tmpdir(), "xstack-"));
    const archive = join(dir, "corpus.ndjson");
    const labels = join(dir, "labels.csv");
    writeSyntheticArchive(makeSyntheticCorpus(80, 13), archive, labels);
    const cliJs = join(__dirname, "..", "dist", "cli.js");
    const modelPath = join(dir, "model.json");
    execFileSync(
      "node",
      [cliJs, "train", "--archive", archive, "--labels", labels,
       "--method", "fewshot", "--k", "15", "--mode", "multiclass",
       "--seed", "3", "--out", modelPath],
      { stdio: "pipe" },
    );
    execFileSync(
      "python3",
      ["-m", "mrlens.cli", "classify", "--corpus", archive,
       "--backend", "service",
       "--service-cmd", `node ${cliJs} serve --model ${modelPath}`,
       "--out", join(dir, "out")],
      { stdio: "pipe" },
    );
    const rows = require("node:fs")
      .readFileSync(join(dir, "out", "labels.csv"), "utf-8")
      .trim()
      .split("\n");
    expect(rows[0]).toBe("mr_id,label,score");
    expect(rows).toHaveLength(81);
    const labelSet = new Set(rows.slice(1).map((r: string) => r.split(",")[1]));
    expect([...labelSet].every((l) => l === "LU" || l === "NORMAL")).toBe(true);
  }, 300_000);
});
