/** Bindings over the core's public operations.
 *
 * Arrays cross the boundary as plain tensors in the shared binary
 * format; structured inputs/outputs as JSON. Semantics are the core's:
 * these functions add no behavior of their own.
 */

import { mkdirSync, readFileSync, writeFileSync } from "node:fs";
import { join } from "node:path";

import { runCore, withWorkdir } from "./core.js";
import { Tensor, readTensor, writeTensor } from "./tensor.js";

export { CoreInputError, CoreInternalError, runCore } from "./core.js";
export * from "./tensor.js";

export interface AnnotationInstance {
  points: number[][];
  transcription?: string;
  fixed_layout?: number;
}

export interface LabelConfig {
  deltaTopBottom?: number;
  deltaHeadTail?: number;
  boundaryTarget?: "chain" | "band_inner_edge";
}

export interface LabelBundle {
  labels: Tensor;
  instanceIds: Tensor;
  cornerOffsets: Tensor;
  boundaryOffsets: Tensor;
  validMask: Tensor;
  meta: Record<string, unknown>;
}

export interface FiducialInstance {
  filtered: boolean;
  filter_reason: string | null;
  points: number[][] | null;
  provenance?: ({ channels: number[]; pixels: number[][] } | null)[];
}

export interface FiducialDoc {
  schema_version: number;
  instances: FiducialInstance[];
}

export interface WarpLayout {
  width: number;
  height: number;
  lambdaTps?: number;
}

const BUNDLE_FILES: [keyof Omit<LabelBundle, "meta">, string][] = [
  ["labels", "labels.tpt"],
  ["instanceIds", "instance_ids.tpt"],
  ["cornerOffsets", "corner_offsets.tpt"],
  ["boundaryOffsets", "boundary_offsets.tpt"],
  ["validMask", "valid_mask.tpt"],
];

export function genLabels(
  instances: AnnotationInstance[],
  size: { width: number; height: number },
  cfg: LabelConfig = {},
): LabelBundle {
  return withWorkdir((dir) => {
    const annPath = join(dir, "annotations.json");
    writeFileSync(annPath, JSON.stringify({ instances }));
    const out = join(dir, "bundle");
    const args = [
      "gen-labels",
      "--annotations", annPath,
      "--width", String(size.width),
      "--height", String(size.height),
      "--out", out,
    ];
    if (cfg.deltaTopBottom !== undefined) args.push("--delta-topbottom", String(cfg.deltaTopBottom));
    if (cfg.deltaHeadTail !== undefined) args.push("--delta-headtail", String(cfg.deltaHeadTail));
    if (cfg.boundaryTarget !== undefined) args.push("--boundary-target", cfg.boundaryTarget);
    runCore(args);
    const bundle = {} as LabelBundle;
    for (const [key, file] of BUNDLE_FILES) bundle[key] = readTensor(join(out, file));
    bundle.meta = JSON.parse(readFileSync(join(out, "meta.json"), "utf-8"));
    return bundle;
  });
}

function writeBundle(dir: string, bundle: LabelBundle): void {
  for (const [key, file] of BUNDLE_FILES) writeTensor(join(dir, file), bundle[key]);
  writeFileSync(join(dir, "meta.json"), JSON.stringify(bundle.meta));
}

export function generateFiducials(
  bundle: LabelBundle,
  n: number,
  opts: { deltaEp?: number; provenance?: boolean } = {},
): FiducialDoc {
  return withWorkdir((dir) => {
    const bundleDir = join(dir, "bundle");
    mkdirSync(bundleDir);
    writeBundle(bundleDir, bundle);
    const out = join(dir, "fiducials.json");
    const args = ["fiducials", "--labels", bundleDir, "--n", String(n), "--out", out];
    if (opts.deltaEp !== undefined) args.push("--delta-ep", String(opts.deltaEp));
    if (opts.provenance) args.push("--provenance");
    runCore(args);
    return JSON.parse(readFileSync(out, "utf-8"));
  });
}

export function warp(region: Tensor, points: number[][], layout: WarpLayout): Tensor {
  return withWorkdir((dir) => {
    const regionPath = join(dir, "region.tpt");
    const pointsPath = join(dir, "points.json");
    const out = join(dir, "rectified.tpt");
    writeTensor(regionPath, region);
    writeFileSync(pointsPath, JSON.stringify(points));
    const args = [
      "rectify",
      "--image", regionPath,
      "--points", pointsPath,
      "--width", String(layout.width),
      "--height", String(layout.height),
      "--out", out,
    ];
    if (layout.lambdaTps !== undefined) args.push("--lambda-tps", String(layout.lambdaTps));
    runCore(args);
    return readTensor(out);
  });
}

export function warpBackward(
  dOutput: Tensor,
  region: Tensor,
  points: number[][],
  layout: WarpLayout,
): { dInput: Tensor; dFiducials: number[][] } {
  return withWorkdir((dir) => {
    const regionPath = join(dir, "region.tpt");
    const pointsPath = join(dir, "points.json");
    const dOutPath = join(dir, "d_output.tpt");
    const dInPath = join(dir, "d_input.tpt");
    const dFidPath = join(dir, "d_fiducials.json");
    writeTensor(regionPath, region);
    writeTensor(dOutPath, dOutput);
    writeFileSync(pointsPath, JSON.stringify(points));
    const args = [
      "warp-backward",
      "--region", regionPath,
      "--points", pointsPath,
      "--d-output", dOutPath,
      "--width", String(layout.width),
      "--height", String(layout.height),
      "--out-d-input", dInPath,
      "--out-d-fiducials", dFidPath,
    ];
    if (layout.lambdaTps !== undefined) args.push("--lambda-tps", String(layout.lambdaTps));
    runCore(args);
    return {
      dInput: readTensor(dInPath),
      dFiducials: JSON.parse(readFileSync(dFidPath, "utf-8")).d_fiducials,
    };
  });
}

export function scatterPointGrads(
  dFiducials: number[][],
  fiducials: FiducialDoc,
  size: { width: number; height: number },
  instance = 0,
): Tensor {
  return withWorkdir((dir) => {
    const dFidPath = join(dir, "d_fiducials.json");
    const pointsPath = join(dir, "fiducials.json");
    const out = join(dir, "d_geometry.tpt");
    writeFileSync(dFidPath, JSON.stringify({ d_fiducials: dFiducials }));
    writeFileSync(pointsPath, JSON.stringify(fiducials));
    runCore([
      "scatter-grads",
      "--d-fiducials", dFidPath,
      "--points", pointsPath,
      "--instance", String(instance),
      "--width", String(size.width),
      "--height", String(size.height),
      "--out", out,
    ]);
    return readTensor(out);
  });
}
