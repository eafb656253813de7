/**
 * Command-line entry point.
 *
 *   synth       write a synthetic labeled corpus (archive + annotation CSV)
 *   train       train a fewshot or encoder model from an archive + labels
 *   eval        evaluate a saved model on an archive + labels
 *   bootstrap   seeded 80/20 bootstrap evaluation, CSV export of raw records
 *   cross       train on one corpus, evaluate on another
 *   serve       run the streaming classification service (stdio or socket)
 */
import { writeFileSync } from "node:fs";
import process from "node:process";
import { loadArtifact, makeArtifact, predictWithArtifact, saveArtifact } from "./artifact.js";
import {
  bootstrapEval,
  crossCorpusEval,
  parseConfigs,
  recordsToCsv,
} from "./bootstrap.js";
import { trainEncoderBaseline } from "./encoder.js";
import { trainFewshot } from "./fewshot.js";
import { evaluate } from "./metrics.js";
import { serveSocket, serveStream } from "./serve.js";
import { makeSyntheticCorpus, writeSyntheticArchive } from "./synth.js";
import { TextExample, buildExamples, readArchive, readLabels } from "./text.js";

interface Flags {
  [key: string]: string;
}

function parseFlags(argv: string[]): Flags {
  const flags: Flags = {};
  for (let i = 0; i < argv.length; i++) {
    if (argv[i].startsWith("--")) {
      const key = argv[i].slice(2);
      const next = argv[i + 1];
      if (next !== undefined && !next.startsWith("--")) {
        flags[key] = next;
        i++;
      } else {
        flags[key] = "true";
      }
    }
  }
  return flags;
}

function need(flags: Flags, key: string): string {
  const value = flags[key];
  if (!value) throw new Error(`missing required flag --${key}`);
  return value;
}

function loadExamples(flags: Flags, archiveKey = "archive", labelsKey = "labels"): TextExample[] {
  const records = readArchive(need(flags, archiveKey));
  const labels = readLabels(need(flags, labelsKey));
  return buildExamples(records, labels, {
    binary: (flags["mode"] ?? "binary") === "binary",
    textOnly: flags["text-only"] === "true",
  });
}

function mode(flags: Flags): "binary" | "multiclass" {
  const value = flags["mode"] ?? "binary";
  if (value !== "binary" && value !== "multiclass") {
    throw new Error(`--mode must be binary or multiclass, got ${value}`);
  }
  return value;
}

async function run(argv: string[]): Promise<number> {
  const [command, ...rest] = argv;
  const flags = parseFlags(rest);
  switch (command) {
    case "synth": {
      const n = Number(flags["n"] ?? "300");
      const seed = Number(flags["seed"] ?? "1");
      const corpus = makeSyntheticCorpus(n, seed);
      writeSyntheticArchive(
        corpus,
        need(flags, "archive"),
        need(flags, "labels"),
      );
      console.log(`wrote ${n} synthetic MRs`);
      return 0;
    }
    case "train": {
      const examples = loadExamples(flags);
      const seed = Number(flags["seed"] ?? "0");
      const method = flags["method"] ?? "fewshot";
      const model =
        method === "fewshot"
          ? trainFewshot(
              examples,
              Number(flags["k"] ?? "15"),
              Number(flags["epochs"] ?? "5"),
              seed,
            )
          : trainEncoderBaseline(examples, Number(flags["epochs"] ?? "5"), seed);
      const artifact = makeArtifact(model, mode(flags));
      saveArtifact(artifact, need(flags, "out"));
      console.log(`trained ${method} on ${examples.length} examples -> ${flags["out"]}`);
      return 0;
    }
    case "eval": {
      const artifact = loadArtifact(need(flags, "model"));
      const examples = loadExamples(flags);
      const golds = examples.map((e) => e.label);
      const predictions = examples.map(
        (e) => predictWithArtifact(artifact, e.text).label,
      );
      const m = evaluate(golds, predictions, artifact.mode);
      console.log(
        `accuracy=${m.accuracy.toFixed(4)} precision=${m.precision.toFixed(4)} ` +
          `recall=${m.recall.toFixed(4)} f1=${m.f1.toFixed(4)}`,
      );
      return 0;
    }
    case "bootstrap": {
      const examples = loadExamples(flags);
      const configs = parseConfigs(flags["configs"] ?? "fewshot:5,fewshot:10,fewshot:15");
      const { records, medians } = bootstrapEval(
        examples,
        configs,
        Number(flags["iterations"] ?? "10"),
        Number(flags["seed"] ?? "0"),
        mode(flags),
      );
      writeFileSync(need(flags, "out"), recordsToCsv(records));
      for (const [name, m] of medians) {
        console.log(
          `${name}: median accuracy=${m.accuracy.toFixed(4)} f1=${m.f1.toFixed(4)}`,
        );
      }
      return 0;
    }
    case "cross": {
      const trainExamples = loadExamples(flags, "train-archive", "train-labels");
      const testExamples = loadExamples(flags, "test-archive", "test-labels");
      const [spec] = parseConfigs(flags["config"] ?? "fewshot:15");
      const m = crossCorpusEval(
        trainExamples,
        testExamples,
        spec,
        Number(flags["seed"] ?? "0"),
        mode(flags),
      );
      console.log(
        `cross-corpus accuracy=${m.accuracy.toFixed(4)} f1=${m.f1.toFixed(4)}`,
      );
      return 0;
    }
    case "serve": {
      const artifact = loadArtifact(need(flags, "model"));
      if (flags["socket"]) {
        const [host, port] = flags["socket"].split(":");
        const { ready } = serveSocket(artifact, host || "127.0.0.1", Number(port));
        const bound = await ready;
        console.error(`listening on ${host || "127.0.0.1"}:${bound}`);
        await new Promise(() => undefined); // run until killed
        return 0;
      }
      await serveStream(artifact, process.stdin, process.stdout);
      return 0;
    }
    default:
      console.error(
        "usage: cli.js <synth|train|eval|bootstrap|cross|serve> [--flags]",
      );
      return 2;
  }
}

run(process.argv.slice(2)).then(
  (code) => process.exit(code),
  (error) => {
    console.error(`error: ${error instanceof Error ? error.message : error}`);
    process.exit(1);
  },
);
