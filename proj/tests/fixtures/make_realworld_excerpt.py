#!/usr/bin/env python3
"""Regenerates the bundled RealWorld-layout excerpt under realworld_excerpt/.

Two subjects, four activities, three body positions, accelerometer +
gyroscope at ~50 Hz with ~1 ms timestamp jitter. Deterministic; re-running
reproduces the committed files byte for byte.
"""

import os
import numpy as np

ROOT = os.path.join(os.path.dirname(os.path.abspath(__file__)), "realworld_excerpt")
ACTIVITIES = ["walking", "running", "sitting", "standing"]
POSITIONS = ["chest", "head", "waist"]
RATE_HZ = 50.0
SECONDS_PER_BLOCK = 24.0

# activity -> (base frequency Hz, amplitude, DC offset)
PROFILE = {
    "walking": (1.8, 0.9, 0.2),
    "running": (2.9, 1.6, 0.35),
    "sitting": (0.3, 0.15, -0.4),
    "standing": (0.4, 0.1, 0.5),
}


def block(rng, activity, subject, position_index, sensor):
    n = int(RATE_HZ * SECONDS_PER_BLOCK)
    base_ms = np.arange(n) * (1000.0 / RATE_HZ)
    jitter = rng.uniform(-1.0, 1.0, size=n)
    t_ms = base_ms + jitter
    t = base_ms / 1000.0

    freq, amp, dc = PROFILE[activity]
    freq *= 1.0 + 0.03 * (subject - 1.5)          # subjects pace differently
    amp *= 1.0 + 0.15 * rng.standard_normal()
    phase = rng.uniform(0, 2 * np.pi, size=3)
    pos_gain = 1.0 + 0.2 * position_index
    sensor_scale = 1.0 if sensor == "acc" else 0.6

    xyz = np.stack(
        [
            sensor_scale * pos_gain * (
                dc + amp * np.sin(2 * np.pi * freq * t + phase[c])
                + 0.35 * amp * np.sin(2 * np.pi * 2.1 * freq * t + 2 * phase[c])
            )
            + 0.08 * rng.standard_normal(n)
            for c in range(3)
        ],
        axis=1,
    )
    return t_ms, xyz


def main():
    rng = np.random.default_rng(20220415)
    for subject in (1, 2):
        data_dir = os.path.join(ROOT, f"proband{subject}", "data")
        os.makedirs(data_dir, exist_ok=True)
        for activity in ACTIVITIES:
            for p, position in enumerate(POSITIONS):
                for sensor in ("acc", "gyr"):
                    t_ms, xyz = block(rng, activity, subject, p, sensor)
                    path = os.path.join(data_dir, f"{sensor}_{activity}_{position}.csv")
                    with open(path, "w") as f:
                        f.write("id,attr_time,attr_x,attr_y,attr_z\n")
                        for i in range(len(t_ms)):
                            f.write(
                                f"{i},{t_ms[i]:.1f},{xyz[i, 0]:.5f},"
                                f"{xyz[i, 1]:.5f},{xyz[i, 2]:.5f}\n"
                            )
    print(f"wrote excerpt under {ROOT}")


if __name__ == "__main__":
    main()
