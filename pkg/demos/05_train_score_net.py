"""Train the small noise-prediction net and compare it with the exact score.

On unit-Gaussian data the marginal score is -x at every noise level, so the
trained network's quality is directly measurable.  The run is short; the
verification suite trains longer and enforces RMSE < 0.1.
"""

import numpy as np

from htx import (MlpNet, NoiseSchedule, TrainConfig, load_weights,
                 net_score_model, save_weights, train)

schedule = NoiseSchedule.vp(t_min=0.1)
data = np.random.default_rng(29).standard_normal((8192, 2))
net = MlpNet.init(2, rng=np.random.default_rng(30))

trained, curve = train(net, data, TrainConfig(steps=3000, seed=29), schedule)
print("step      training loss")
for step, loss in curve[::5]:
    print(f"{int(step):5d}    {loss:10.4f}")

model = net_score_model(trained, schedule)
grid = np.linspace(-2.0, 2.0, 7)
points = np.array([[a, b] for a in grid for b in grid])
print("\nnoise level   score rmse vs exact (-x)")
for t in (0.1, 0.3, 0.5, 0.7, 0.9):
    rmse = np.sqrt(np.mean((model.score(points, t) + points) ** 2))
    _, sigma = schedule.alpha_sigma(t)
    print(f"sigma={sigma:.3f}     {rmse:.4f}")

save_weights(trained, "demo_scorenet.htx")
reloaded = load_weights("demo_scorenet.htx")
assert all(np.array_equal(a, b) for a, b in zip(reloaded.params, trained.params))
print("\nwrote demo_scorenet.htx (persisted weights reload bit for bit)")
