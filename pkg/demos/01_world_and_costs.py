# Walk through the cost and reward mechanics on a hand-built world.
#
# A collection session moves the microscope between holes; each move is
# charged minutes by how far apart the holes sit in the
# grid > square > patch hierarchy, and scoring a good (low-CTF) hole earns
# a reward that shrinks with the same distance.

from cryoplan import (
    MoveClass,
    RewardTable,
    cost_penalty,
    move_cost,
    new_episode,
    objective_value,
)
from cryoplan.atlas import Dataset, Grid, Hole, Patch, Square

# Two grids, a couple of squares each; CTF <= 6.0 is a good hole.
holes = [
    Hole("G0-S0-P0-H0", "G0-S0-P0", 0, 0, ctf=4.2),
    Hole("G0-S0-P0-H1", "G0-S0-P0", 1, 0, ctf=8.1),
    Hole("G0-S0-P1-H0", "G0-S0-P1", 0, 0, ctf=5.0),
    Hole("G0-S1-P0-H0", "G0-S1-P0", 0, 0, ctf=5.8),
    Hole("G1-S0-P0-H0", "G1-S0-P0", 0, 0, ctf=3.9),
]
ds = Dataset(
    grids=[Grid("G0", ("G0-S0", "G0-S1")), Grid("G1", ("G1-S0",))],
    squares=[
        Square("G0-S0", "G0", ("G0-S0-P0", "G0-S0-P1")),
        Square("G0-S1", "G0", ("G0-S1-P0",)),
        Square("G1-S0", "G1", ("G1-S0-P0",)),
    ],
    patches=[
        Patch("G0-S0-P0", "G0-S0", ("G0-S0-P0-H0", "G0-S0-P0-H1")),
        Patch("G0-S0-P1", "G0-S0", ("G0-S0-P1-H0",)),
        Patch("G0-S1-P0", "G0-S1", ("G0-S1-P0-H0",)),
        Patch("G1-S0-P0", "G1-S0", ("G1-S0-P0-H0",)),
    ],
    holes=holes,
)

print("move costs (minutes):")
for mc in MoveClass:
    print(f"  {mc.name:<15} {move_cost(mc):>5.1f}")

print("\ntime penalty 1 - exp(-0.185 (t - 2)):")
for t in (2.0, 3.0, 5.0, 10.0):
    print(f"  t={t:>5.1f} -> {cost_penalty(t):.4f}")

table = RewardTable()
print("\nstep rewards for a low-CTF hole:", table.low_rewards)
print("for a high-CTF hole:", table.high_reward)

# Run a short session: start on the first hole, 20 minutes of stage time.
st = new_episode(ds, "G0-S0-P0-H0", budget=20.0)
for target in ("G0-S0-P0-H1", "G0-S0-P1-H0", "G0-S1-P0-H0", "G1-S0-P0-H0"):
    if target not in st.legal_actions():
        print(f"\n{target} no longer affordable at elapsed={st.elapsed}")
        break
    step = st.step(target)
    print(
        f"\nvisited {step.hole_id}: {step.move_class.name}, cost {step.cost}, "
        f"reward {step.reward}, low={step.is_low}"
    )

print(f"\nelapsed {st.elapsed} min of {st.budget}; return {st.total_reward:.2f}")
print(f"low-CTF holes found (start excluded): {st.lctf_found}")
print(f"trajectory objective (indicator - time penalty): {objective_value(st.trajectory):.4f}")
