"""Train a small robust deep hedge for a call and inspect its errors.

The strategy is a ReLU network evaluated at every rebalancing date plus
a trainable cash position d; training minimizes the summed squared
terminal hedging error on freshly simulated robust batches.  After
training, d is the price the desk would charge and the relative errors
measure how well that premium plus trading covers the payoff.

This is a scaled-down run (width 32, 600 iterations, ~20 s); the
experiment runners in robusthedge.experiments use the full settings.
"""

from robusthedge import (
    ParameterBox,
    RngSpec,
    TimeGrid,
    TrainConfig,
    call,
    evaluate,
    sample_paths,
    train,
)

box = ParameterBox(
    b0_range=(-0.2, 0.2),
    b1_range=(-0.1, 0.1),
    a0_range=(0.3, 0.7),
    a1_range=(0.4, 0.6),
    gamma_range=(0.5, 1.5),
)
grid = TimeGrid.uniform(30 / 365, 30)
spec = call(10.0)
config = TrainConfig(n_hidden_layers=2, width=32, n_iterations=600,
                     batch_size=128, learning_rate=0.005)

losses = []
model = train(box, 10.0, grid, spec, config, RngSpec(seed=1),
              loss_callback=lambda it, loss: losses.append(loss))
print(f"first-100-iteration median loss: {sorted(losses[:100])[50]:.1f}")
print(f"last-100-iteration median loss:  {sorted(losses[-100:])[50]:.1f}")
print(f"learned price d = {model.d:.4f}")

# evaluation paths must come from a stream the trainer never touched
eval_batch = sample_paths(box, 10.0, grid, 5000, RngSpec(seed=1, stream=10**9))
report = evaluate(model, eval_batch, spec)
summary = report.summary()
print(f"mean |relative error| = {summary['mean_abs']:.3f} "
      f"(std {summary['std_abs']:.3f}) over {summary['n_paths']} paths")

# the hedge position itself is a callable strategy
for x in (9.0, 10.0, 11.0):
    print(f"  h(t=0, x={x:4.1f}) = {model.strategy(0.0, x):6.3f}")
