"""Build a fully crossed rating log (50 items x 2 evaluators x 3 methods)
whose aggregate reproduces the published human-evaluation totals.

Targets are per-evaluator integer sums; the two evaluators' sums add up to
twice the published per-perspective value. Items 0..A-1 get (2,2,2), where A
is that evaluator's All-2s count; the remaining points are spread so that
no other item reaches 2 on all three perspectives.
"""
import json
import sys

ITEMS = 50
# method -> evaluator -> (situation, time_season, emotion, all_2s)
TARGETS = {
    "musiccaps": {"e1": (39, 6, 37, 2), "e2": (39, 6, 36, 1)},
    "gpt_baseline": {"e1": (47, 35, 89, 13), "e2": (46, 35, 89, 13)},
    "proposed": {"e1": (76, 72, 83, 24), "e2": (75, 72, 83, 23)},
}


def fill(target):
    sit, time, emo, all2 = target
    scores = [[0, 0, 0] for _ in range(ITEMS)]
    for i in range(all2):
        scores[i] = [2, 2, 2]
    remaining = [sit - 2 * all2, time - 2 * all2, emo - 2 * all2]
    rest = list(range(all2, ITEMS))
    # Round-robin single points; never let an item reach (2,2,2).
    for p in range(3):
        order = rest if p != 1 else rest[::-1]
        while remaining[p] > 0:
            progressed = False
            for i in order:
                if remaining[p] == 0:
                    break
                if scores[i][p] >= 2:
                    continue
                trial = list(scores[i])
                trial[p] += 1
                if trial == [2, 2, 2]:
                    continue
                scores[i] = trial
                remaining[p] -= 1
                progressed = True
            if not progressed:
                sys.exit(f"cannot place targets {target}")
    return scores


def main():
    out = []
    for method, evs in TARGETS.items():
        for ev, target in evs.items():
            for i, s in enumerate(fill(target)):
                out.append({
                    "item_id": f"mc{i:03d}",
                    "method": method,
                    "evaluator_id": ev,
                    "situation": s[0],
                    "time_season": s[1],
                    "emotion": s[2],
                })
    for row in out:
        print(json.dumps(row, separators=(",", ":")))


if __name__ == "__main__":
    main()
