#!/usr/bin/env python3
"""The growing action set, step by step.

A session starts with a single action: "this is somebody NEW". Every decision
scores that arm alongside the confirmed speakers; user feedback confirms new
speakers into existence, corrects mistakes, and trains the bandit. This demo
drives the loop on raw feature vectors so every number is easy to follow.
"""

import numpy as np

from diarl import FeedbackEvent, Session, SessionConfig
from diarl.features import FeatureVector

ADA = np.array([4.0, 0.0, 1.0])
BEN = np.array([0.0, 4.0, -1.0])

session = Session(SessionConfig(policy="linucb", seed=1), use_extractor=False)

def step(i, x):
    fv = FeatureVector(values=np.asarray(x, dtype=np.float64), segment_id=i)
    entry = session.decide(fv, float(i), float(i + 1))
    scores = "  ".join(f"{session.registry.name_of(a)}={s:.2f}"
                       for a, s in sorted(entry.decision.scores.items()))
    print(f"segment {i}: chose {entry.emitted_label:5s} "
          f"(confidence {entry.decision.confidence:.2f})   scores: {scores}")
    return entry

def feedback(i, kind, label=None):
    session.submit_feedback(FeedbackEvent(segment_id=i, kind=kind, label=label,
                                          arrival_time=session.stream_time))
    print(f"  -> feedback on segment {i}: {kind}" + (f" ({label})" if label else ""))

print("--- a fresh session knows nobody -------------------------------------")
print(f"actions: {[session.registry.name_of(a) for a in session.registry.actions()]}")

print("\n--- Ada speaks; the only sensible call is NEW -------------------------")
step(0, ADA)
feedback(0, "new_speaker", "Ada")

print("\n--- Ada keeps talking; her arm now exists and wins --------------------")
step(1, ADA + 0.1)
feedback(1, "confirm")
step(2, ADA - 0.1)

print("\n--- Ben enters; no model fits, scores collapse to a near tie -----------")
step(3, BEN)
feedback(3, "new_speaker", "Ben")  # announcing Ben credits his fresh arm
step(4, BEN + 0.1)

print("\n--- a mistake gets corrected: penalty to the chosen arm, credit to Ben -")
entry = step(5, BEN - 0.2)
if entry.emitted_label != "Ben":
    feedback(5, "correct", "Ben")
    step(6, BEN)
else:
    print("  (no mistake this time; corrections would route exactly like this)")

print("\n--- where things ended up ----------------------------------------------")
print(f"actions: {[session.registry.name_of(a) for a in session.registry.actions()]}")
for arm, state in sorted(session.policy.arms.items()):
    print(f"  arm {session.registry.name_of(arm):5s} updates={state.n_updates}")
print(f"timeline entries: {len(session.timeline)}, "
      f"rewards recorded: {sum(e.reward is not None for e in session.timeline)}")
