"""Drive the reproduction surface end to end through the CLI.

Writes a config file, trains the goal-oriented system and the JSCC
baseline, merges an alpha sweep, and (when the frontend is built) renders
the accuracy figure from the merged metrics.csv.  Everything lands in
demos/out/.
"""

import os
import shutil
import subprocess
import sys

HERE = os.path.dirname(os.path.abspath(__file__))
OUT = os.path.join(HERE, "out")
os.makedirs(OUT, exist_ok=True)

CFG = """
[experiment]
task = classify
system = gocom
seed = 1

[data]
source = synth
n_train = 1200
n_test = 300
classes = 8
noise = 0.02

[model]
rate = 1/6
arch = conv
snr_gate = on

[channel]
kind = awgn
train_snr = range:-2:20
test_snrs = -2,0,4,8,12,16,20

[train]
alpha = 0.1
lr = 1e-3
batch = 32
epochs = 12
pretrain_epochs = 8
repeats = 5
"""

cfg_path = os.path.join(OUT, "experiment.cfg")
with open(cfg_path, "w") as f:
    f.write(CFG)


def cli(*args):
    cmd = [sys.executable, "-m", "gocom.cli", *args]
    print("+", " ".join(args))
    subprocess.run(cmd, check=True)


# alpha sweep for the goal-oriented system: two curves, like the figure
# in the write-up, then the JSCC baseline into its own directory.
cli("sweep", "--config", cfg_path, "--axis", "alpha", "--values", "0.01,0.1",
    "--out", os.path.join(OUT, "sweep"))
cli("baseline", "--config", cfg_path, "--out", os.path.join(OUT, "jscc"))

# Merge the baseline rows into the sweep csv for a single plot input.
sweep_csv = os.path.join(OUT, "sweep", "metrics.csv")
jscc_csv = os.path.join(OUT, "jscc", "metrics.csv")
merged = os.path.join(OUT, "metrics.csv")
with open(merged, "w") as dst:
    with open(sweep_csv) as f:
        dst.write(f.read())
    with open(jscc_csv) as f:
        dst.write("".join(f.readlines()[1:]))
print(f"merged metrics -> {merged}")

plot_js = os.path.join(HERE, "..", "frontend", "dist", "src", "main.js")
node = shutil.which("node")
if node and os.path.exists(plot_js):
    fig = os.path.join(OUT, "accuracy_snr.svg")
    subprocess.run([node, plot_js, "--csv", merged, "--kind", "accuracy_snr",
                    "--out", fig], check=True)
    print(f"figure -> {fig}")
else:
    print("frontend not built; skipping figure (cd frontend && npm install && npm run build)")
