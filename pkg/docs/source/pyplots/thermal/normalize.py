import matplotlib.pyplot as plt
import numpy as np

from thermofuse.thermal import RawThermalFrame, adaptive_window, celsius_to_counts, normalize, to_celsius

x, y = np.meshgrid(np.linspace(-1, 1, 160), np.linspace(-1, 1, 120))
foot = (x / 0.6) ** 2 + (y / 0.85) ** 2 <= 1
celsius = np.where(foot, 31.0, 22.0) + 6.0 * np.exp(-((x - 0.2) ** 2 + (y + 0.3) ** 2) / 0.01)
frame = RawThermalFrame(pixels=celsius_to_counts(celsius))

temperature_map = to_celsius(frame)
window = adaptive_window(temperature_map)
norm = normalize(temperature_map, window)

fig, (ax, ax2) = plt.subplots(1, 2, figsize=(9, 3.5))
image = ax.imshow(temperature_map.celsius, cmap="inferno")
fig.colorbar(image, ax=ax, label="°C")
ax.set_title(f"Temperatures (mean {temperature_map.mean_c:.1f} °C)")
image = ax2.imshow(norm.values, cmap="gray", vmin=0, vmax=1)
fig.colorbar(image, ax=ax2)
ax2.set_title(f"Normalized on [{window.lo:.0f}, {window.hi:.0f}] °C")
for axis in (ax, ax2):
    axis.set_axis_off()
fig.tight_layout()
