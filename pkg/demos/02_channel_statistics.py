"""The stochastic channel layer: normalization, AWGN, Rayleigh block fading.

Transmit blocks are normalized to unit average symbol power, so SNR in dB
maps directly to the noise power 10^(-SNR/10).  Slow fading multiplies a
whole block by one complex gain; with perfect CSI the receiver divides it
out, leaving amplified noise z + n/c.
"""

import numpy as np

from gocom.channel import ChannelConfig, normalize_power, snr_to_noise_power, transmit
from gocom.tensor import Tensor

rng = np.random.default_rng(7)

# Power normalization: whatever the encoder emits, blocks leave at power 1.
raw = Tensor(rng.standard_normal((4, 64)) * 12.3)
z = normalize_power(raw, s=32)
print("per-block symbol power:", np.round(z.symbol_power(), 12))

# AWGN at three SNRs: the empirical noise power matches 10^(-snr/10).
big = normalize_power(Tensor(rng.standard_normal((1, 200_000))), 100_000)
for snr in (0.0, 10.0, 20.0):
    zhat, real = transmit(big, ChannelConfig("awgn", snr), rng)
    pairs = real.noise.reshape(-1, 2)
    emp = np.mean(pairs[:, 0] ** 2 + pairs[:, 1] ** 2)
    print(f"{snr:5.1f} dB: sigma^2 = {snr_to_noise_power(snr):.4f}, empirical = {emp:.4f}")

# Rayleigh slow fading: E|c|^2 = 1, and equalization restores the block
# up to noise scaled by 1/|c|.
blocks = normalize_power(Tensor(rng.standard_normal((50_000, 8))), 4)
zhat, real = transmit(blocks, ChannelConfig("slow_fading", 10.0), rng)
print(f"E|c|^2 = {np.mean(np.abs(real.c) ** 2):.4f} (Rayleigh gain, unit mean square)")
print(f"redraws of near-zero gains: {real.redraws}")

# The noiseless sentinel short-circuits the whole layer.
clean, _ = transmit(blocks, ChannelConfig("slow_fading", None))
print("noiseless sentinel is exact:", np.array_equal(clean.data, blocks.data))
