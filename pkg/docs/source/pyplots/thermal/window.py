import matplotlib.pyplot as plt
import numpy as np

from thermofuse.thermal import window_for_mean

means = np.linspace(15, 60, 451)
windows = [window_for_mean(mean) for mean in means]

fig, ax = plt.subplots()
ax.fill_between(
    means,
    [w.lo for w in windows],
    [w.hi for w in windows],
    color="lightgray",
    label="Window",
)
ax.plot(means, means, color="black", label="Mean temperature")
ax.grid()
ax.set_xlabel("Mean temperature of the frame [°C]")
ax.set_ylabel("Temperature [°C]")
ax.legend()
fig.tight_layout()
