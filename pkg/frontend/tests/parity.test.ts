/**
 * Parity suite: every bound operation must return exactly the bytes the
 * core CLI writes for the same inputs. A 20-case corpus of randomized
 * annotation sets is generated deterministically; the core CLI is run
 * directly as the oracle and the binding's re-encoded tensors are
 * compared byte-for-byte.
 */

import { mkdtempSync, readFileSync, rmSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { afterAll, describe, expect, it } from "vitest";

import {
  AnnotationInstance,
  CoreInputError,
  FiducialDoc,
  encodeTensor,
  genLabels,
  generateFiducials,
  runCore,
  scatterPointGrads,
  tensor,
  warp,
  warpBackward,
} from "../src/index.js";

/** Deterministic 32-bit PRNG so the corpus is frozen across runs. */
function mulberry32(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a = (a + 0x6d2b79f5) >>> 0;
    let t = a;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

const WIDTH = 128;
const HEIGHT = 96;

function corpusCase(seed: number): AnnotationInstance[] {
  const rnd = mulberry32(seed * 7919 + 17);
  const instances: AnnotationInstance[] = [];
  const rows = 1 + (seed % 2);
  for (let i = 0; i < rows; i++) {
    const w = 60 + Math.floor(rnd() * 50);
    const h = 18 + Math.floor(rnd() * 10);
    const x = 4 + Math.floor(rnd() * (WIDTH - w - 8));
    const y = 6 + i * 44 + Math.floor(rnd() * 6);
    instances.push({
      points: [
        [x, y],
        [x + w, y],
        [x + w, y + h],
        [x, y + h],
      ],
      transcription: String(1000 + Math.floor(rnd() * 9000)),
    });
  }
  return instances;
}

const scratch: string[] = [];
function workdir(): string {
  const dir = mkdtempSync(join(tmpdir(), "textperc-parity-"));
  scratch.push(dir);
  return dir;
}
afterAll(() => scratch.forEach((d) => rmSync(d, { recursive: true, force: true })));

function coreBundle(instances: AnnotationInstance[]): string {
  const dir = workdir();
  const annPath = join(dir, "ann.json");
  writeFileSync(annPath, JSON.stringify({ instances }));
  const out = join(dir, "bundle");
  runCore([
    "gen-labels",
    "--annotations", annPath,
    "--width", String(WIDTH),
    "--height", String(HEIGHT),
    "--out", out,
  ]);
  return out;
}

function regionTensor(seed: number) {
  const rnd = mulberry32(seed);
  const t = tensor([HEIGHT, WIDTH], "f32");
  const data = t.data as Float32Array;
  for (let i = 0; i < data.length; i++) data[i] = Math.fround(rnd());
  return t;
}

describe("20-case corpus parity", () => {
  for (let seed = 0; seed < 20; seed++) {
    it(`case ${seed}: labels, fiducials, warp and backward match the core bytes`, () => {
      const instances = corpusCase(seed);
      const expectedDir = coreBundle(instances);

      // gen-labels parity: re-encoded binding tensors equal the core files
      const bundle = genLabels(instances, { width: WIDTH, height: HEIGHT });
      const files: [keyof typeof bundle, string][] = [
        ["labels", "labels.tpt"],
        ["instanceIds", "instance_ids.tpt"],
        ["cornerOffsets", "corner_offsets.tpt"],
        ["boundaryOffsets", "boundary_offsets.tpt"],
        ["validMask", "valid_mask.tpt"],
      ];
      for (const [key, file] of files) {
        const expected = readFileSync(join(expectedDir, file));
        expect(encodeTensor(bundle[key] as never).equals(expected), file).toBe(true);
      }

      // fiducials parity: binding JSON equals the core CLI JSON
      const fidDir = workdir();
      const fidPath = join(fidDir, "fid.json");
      runCore([
        "fiducials", "--labels", expectedDir, "--n", "4",
        "--out", fidPath, "--provenance",
      ]);
      const expectedFid = JSON.parse(readFileSync(fidPath, "utf-8")) as FiducialDoc;
      const fid = generateFiducials(bundle, 4, { provenance: true });
      expect(fid).toEqual(expectedFid);

      // warp parity: binding output equals the core rectify tensor
      const region = regionTensor(seed + 100);
      const points = fid.instances.find((r) => r.points)!.points!;
      const regionPath = join(fidDir, "region.tpt");
      writeFileSync(regionPath, encodeTensor(region));
      const pointsPath = join(fidDir, "points.json");
      writeFileSync(pointsPath, JSON.stringify(points));
      const rectPath = join(fidDir, "rect.tpt");
      runCore([
        "rectify", "--image", regionPath, "--points", pointsPath,
        "--width", "48", "--height", "16", "--out", rectPath,
      ]);
      const rect = warp(region, points, { width: 48, height: 16 });
      expect(encodeTensor(rect).equals(readFileSync(rectPath))).toBe(true);

      // backward parity: d_input bytes and d_fiducials JSON match
      const dOut = regionTensor(seed + 200);
      dOut.shape = [16, 48, 1];
      dOut.data = (dOut.data as Float32Array).slice(0, 16 * 48);
      const dOutPath = join(fidDir, "d_out.tpt");
      writeFileSync(dOutPath, encodeTensor(dOut));
      const dInPath = join(fidDir, "d_in.tpt");
      const dFidPath = join(fidDir, "d_fid.json");
      runCore([
        "warp-backward", "--region", regionPath, "--points", pointsPath,
        "--d-output", dOutPath, "--width", "48", "--height", "16",
        "--out-d-input", dInPath, "--out-d-fiducials", dFidPath,
      ]);
      const grads = warpBackward(dOut, region, points, { width: 48, height: 16 });
      expect(encodeTensor(grads.dInput).equals(readFileSync(dInPath))).toBe(true);
      expect(grads.dFiducials).toEqual(
        JSON.parse(readFileSync(dFidPath, "utf-8")).d_fiducials,
      );

      // scatter parity
      const dGeoPath = join(fidDir, "d_geo.tpt");
      runCore([
        "scatter-grads", "--d-fiducials", dFidPath, "--points", fidPath,
        "--width", String(WIDTH), "--height", String(HEIGHT), "--out", dGeoPath,
      ]);
      const dGeo = scatterPointGrads(
        grads.dFiducials, fid, { width: WIDTH, height: HEIGHT },
      );
      expect(encodeTensor(dGeo).equals(readFileSync(dGeoPath))).toBe(true);
    });
  }
});

describe("edge cases", () => {
  it("empty annotation list gives all-background labels", () => {
    const bundle = genLabels([], { width: 32, height: 24 });
    expect(bundle.labels.shape).toEqual([24, 32]);
    expect((bundle.labels.data as Uint8Array).every((v) => v === 0)).toBe(true);
    expect((bundle.instanceIds.data as Int32Array).every((v) => v === 0)).toBe(true);
  });

  it("invalid polygon raises an input error carrying the core message", () => {
    expect(() =>
      genLabels([{ points: [[0, 0], [1, 0], [1, 1]] }], { width: 32, height: 24 }),
    ).toThrowError(CoreInputError);
    try {
      genLabels([{ points: [[0, 0], [1, 0], [1, 1]] }], { width: 32, height: 24 });
    } catch (err) {
      expect(String(err)).toContain("at least 4");
    }
  });
});
