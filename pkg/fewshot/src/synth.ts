/**
 * Synthetic labeled corpus in the documented mrlens formats: a corpus
 * archive (NDJSON, header line first) plus an annotation CSV. Each class is
 * a union of template families with disjoint vocabulary, so a classifier
 * only generalizes to a family it has seen a shot from; more shots per
 * class genuinely help.
 */
import { writeFileSync } from "node:fs";
import { Rng } from "./rng.js";
import { ArchiveRecord } from "./text.js";

const PACKAGES = ["lodash", "httpcore", "serde", "yaml-rs", "leftpad", "tokio"];
const COMPONENTS = ["scheduler", "session pool", "parser", "transport", "cache", "router"];
const FEATURES = ["timeouts", "retries", "pagination", "metrics", "streaming", "batching"];

const LU_FAMILIES: ((rng: Rng) => { title: string; description: string })[] = [
  (rng) => ({
    title: `bump ${pick(rng, PACKAGES)} from ${ver(rng)} to ${ver(rng)}`,
    description: "routine dependency bump, lockfile only",
  }),
  (rng) => ({
    title: `update dependency ${pick(rng, PACKAGES)}`,
    description: "automated version refresh of a third-party library",
  }),
  (rng) => ({
    title: `chore: upgrade ${pick(rng, PACKAGES)} to ${ver(rng)}`,
    description: "keeps the manifest current, no source edits",
  }),
  (rng) => ({
    title: `renovate: pin ${pick(rng, PACKAGES)} ${ver(rng)}`,
    description: "bot-created pin of a transitive requirement",
  }),
  (rng) => ({
    title: `deps: refresh lockfile after ${pick(rng, PACKAGES)} release`,
    description: "regenerated lock entries, nothing else touched",
  }),
  (rng) => ({
    title: `security advisory fix for ${pick(rng, PACKAGES)}`,
    description: "CVE patch picked up through the package registry",
  }),
];

const NORMAL_FAMILIES: ((rng: Rng) => { title: string; description: string })[] = [
  (rng) => ({
    title: `add ${pick(rng, FEATURES)} endpoint to ${pick(rng, COMPONENTS)}`,
    description: "new request handler with validation and tests",
  }),
  (rng) => ({
    title: `fix race condition in ${pick(rng, COMPONENTS)}`,
    description: "guards shared state behind the existing mutex",
  }),
  (rng) => ({
    title: `implement caching for ${pick(rng, COMPONENTS)}`,
    description: "memoizes hot lookups and invalidates on write",
  }),
  (rng) => ({
    title: `refactor ${pick(rng, COMPONENTS)} error handling`,
    description: "collapses duplicated recovery paths into one helper",
  }),
  (rng) => ({
    title: `improve logging in ${pick(rng, COMPONENTS)}`,
    description: "adds structured fields for request tracing",
  }),
  (rng) => ({
    title: `support ${pick(rng, FEATURES)} in ${pick(rng, COMPONENTS)}`,
    description: "extends the public interface behind a feature flag",
  }),
];

function pick<T>(rng: Rng, items: readonly T[]): T {
  return items[rng.int(items.length)];
}

function ver(rng: Rng): string {
  return `${rng.int(9)}.${rng.int(20)}.${rng.int(20)}`;
}

// Both classes draw from the same pool of touched files so the metadata tags
// alone cannot separate them; the title/description vocabulary carries the
// signal.
const SHARED_FILES = [
  { path: "src/core.py", additions: 30, deletions: 10 },
  { path: "package.json", additions: 2, deletions: 2 },
  { path: "config/settings.yaml", additions: 4, deletions: 1 },
];

export interface SyntheticCorpus {
  records: ArchiveRecord[];
  labels: Map<number, string>;
}

export function makeSyntheticCorpus(n: number, seed: number): SyntheticCorpus {
  const rng = new Rng(seed);
  const records: ArchiveRecord[] = [];
  const labels = new Map<number, string>();
  for (let i = 1; i <= n; i++) {
    const isLu = i % 2 === 0;
    const families = isLu ? LU_FAMILIES : NORMAL_FAMILIES;
    const family = families[rng.int(families.length)];
    const { title, description } = family(rng);
    const file = pick(rng, SHARED_FILES);
    records.push({
      id: i,
      project_id: 900,
      title,
      description,
      state: "merged",
      source_branch: `topic/${i % 9}`,
      target_branch: "main",
      file_changes: [{ ...file }],
    });
    labels.set(i, isLu ? "LU" : "NORMAL");
  }
  return { records, labels };
}

export function writeSyntheticArchive(
  corpus: SyntheticCorpus,
  archivePath: string,
  labelsPath: string,
): void {
  const header = {
    format: "mrlens-corpus",
    version: 1,
    host: "https://forge.example",
    group: "fewshot-synthetic",
    fetched_at: "2024-06-01T00:00:00.000Z",
    project_ids: [900],
    project_created_at: {},
    record_count: corpus.records.length,
  };
  const lines = [JSON.stringify(header)];
  for (const record of corpus.records) {
    lines.push(
      JSON.stringify({
        ...record,
        created_at: "2024-01-01T00:00:00.000Z",
        merged_at: "2024-01-02T00:00:00.000Z",
        labels: [],
        is_draft_flag: false,
        commits: [],
        notes: [],
        reviewers: [],
        assignees: [],
        approvals: [],
        author: 1,
      }),
    );
  }
  writeFileSync(archivePath, lines.join("\n") + "\n");
  const csv = ["mr_id,url,label,note"];
  for (const record of corpus.records) {
    csv.push(`${record.id},https://forge.example/mr/${record.id},${corpus.labels.get(record.id)},`);
  }
  writeFileSync(labelsPath, csv.join("\n") + "\n");
}
