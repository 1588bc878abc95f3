"""Detect instances from ground-truth maps, place fiducial points and
rectify each curved instance to a straight strip.

Produces gallery/out/fiducials.png (points over the scene) and one
gallery/out/rectified_<i>.png strip per instance.
"""

from pathlib import Path

import numpy as np
from PIL import Image

from textperc.annotations import render_overlay
from textperc.detect import polygon_iou
from textperc.fiducials import FiducialConfig
from textperc.labels import gen_labels
from textperc.pipeline import (
    annotation_index,
    attach_fiducials,
    detect_instances,
    rectify_instance,
)
from textperc.synth import synth_scene
from textperc.tps import DestLayout

OUT = Path(__file__).parent / "out"


def main():
    OUT.mkdir(exist_ok=True)
    scene = synth_scene(seed=11)
    score, geo = gen_labels(scene.annotations, scene.image.shape[:2])
    instances, comps = detect_instances(score.labels)
    attach_fiducials(instances, comps, geo, FiducialConfig(n=7))

    layout = DestLayout(96, 28, n=7)
    fid_sets = []
    for i, inst in enumerate(instances):
        if inst.filtered:
            print(f"instance {i}: filtered ({inst.filter_reason})")
            continue
        ann = scene.annotations[annotation_index(inst, comps, score.instance_ids)]
        iou = polygon_iou(inst.polygon, ann.points)
        print(f"instance {i}: '{ann.transcription}', polygon IoU {iou:.3f}")
        fid_sets.append(inst.fiducials)

        rect, _ = rectify_instance(scene.image, inst.fiducials, layout)
        strip = (np.clip(rect.values[:, :, 0], 0, 1) * 255).astype(np.uint8)
        Image.fromarray(strip).save(OUT / f"rectified_{i}.png")

    render_overlay(scene.image, score, fid_sets, OUT / "fiducials.png")
    print(f"wrote {OUT / 'fiducials.png'} and {len(fid_sets)} rectified strips")


if __name__ == "__main__":
    main()
