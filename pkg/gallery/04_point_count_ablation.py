"""How many fiducial points does curved text need?

Sweeps the total point count 2N over synthetic curved and straight
scenes and prints the mean polygon IoU per setting: curved text needs
8-10 points before the ring hugs the boundary; straight text is covered
by the four corners alone.
"""

from textperc.demo import eval_ablation
from textperc.synth import SceneConfig, synth_scene

COUNTS = [4, 6, 8, 10, 12, 14]


def main():
    curved = [synth_scene(1000 + s) for s in range(25)]
    straight = [synth_scene(2000 + s, SceneConfig(curvature=(0.0, 0.0))) for s in range(25)]

    curved_rows = eval_ablation(COUNTS, curved)
    straight_rows = eval_ablation(COUNTS, straight)

    print("points (2N)   curved mean IoU   straight mean IoU")
    for c, s in zip(curved_rows, straight_rows):
        print(f"{c.two_n:11d}   {c.mean_iou:15.3f}   {s.mean_iou:17.3f}")


if __name__ == "__main__":
    main()
