/** Serialized model artifacts: JSON with a version tag and a config fingerprint. */
import { createHash } from "node:crypto";
import { readFileSync, writeFileSync } from "node:fs";
import { EncoderModel, predictEncoder } from "./encoder.js";
import { FewshotModel, predictFewshot } from "./fewshot.js";

export const ARTIFACT_TAG = "mrlens-fewshot-model";
export const ARTIFACT_VERSION = 1;

export interface Artifact {
  artifact: string;
  version: number;
  mode: "binary" | "multiclass";
  fingerprint: string;
  model: FewshotModel | EncoderModel;
}

export function makeArtifact(
  model: FewshotModel | EncoderModel,
  mode: "binary" | "multiclass",
): Artifact {
  const fingerprint = createHash("sha256")
    .update(JSON.stringify({ kind: model.kind, config: model.config, mode }))
    .digest("hex")
    .slice(0, 16);
  return { artifact: ARTIFACT_TAG, version: ARTIFACT_VERSION, mode, fingerprint, model };
}

export function saveArtifact(artifact: Artifact, path: string): void {
  writeFileSync(path, JSON.stringify(artifact));
}

export function loadArtifact(path: string): Artifact {
  const doc = JSON.parse(readFileSync(path, "utf-8")) as Artifact;
  if (doc.artifact !== ARTIFACT_TAG || doc.version !== ARTIFACT_VERSION) {
    throw new Error(`${path}: not a ${ARTIFACT_TAG} v${ARTIFACT_VERSION} artifact`);
  }
  return doc;
}

export function predictWithArtifact(
  artifact: Artifact,
  text: string,
): { label: string; score: number } {
  if (artifact.model.kind === "fewshot") {
    return predictFewshot(artifact.model, text);
  }
  return predictEncoder(artifact.model, text);
}
