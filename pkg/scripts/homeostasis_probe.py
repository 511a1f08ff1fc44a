"""Single neuron, one repeated input: does the threshold rule settle the firing time?

Runs the probe under both threshold rules, with frozen weights and with STDP,
and prints when (if ever) the firing time stays within ``--tol`` of
t_expected for the rest of the run. No dataset needed.

    python scripts/homeostasis_probe.py --presentations 2000 --trace trace.tsv
"""

import argparse

import numpy as np

from snnwhiten.snn import HomeostasisConfig, init_layer, repeat_presentation
from snnwhiten.spike_coding import encode_latency


def settle_point(times: np.ndarray, target: float, tol: float, hold: int) -> int | None:
    bad = np.flatnonzero(~(np.abs(times - target) <= tol))
    start = 0 if len(bad) == 0 else int(bad[-1] + 1)
    return start if len(times) - start >= hold else None


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--inputs", type=int, default=150)
    parser.add_argument("--presentations", type=int, default=500)
    parser.add_argument("--lr-w", type=float, default=0.1, help="STDP rate for the plastic runs")
    parser.add_argument("--tol", type=float, default=0.02)
    parser.add_argument("--hold", type=int, default=50)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--trace", help="optional TSV of firing times per presentation")
    args = parser.parse_args()

    spikes = encode_latency(np.arange(1, args.inputs + 1) / args.inputs)
    traces = {}
    print(f"{'rule':<14}{'weights':<9}{'settled at':>11}{'fired (last 50)':>17}{'last t':>8}")
    for decay in (False, True):
        homeo = HomeostasisConfig(winner_decay=decay)
        for lr_w in (0.0, args.lr_w):
            layer = init_layer(1, args.inputs, 1, 1, args.seed)
            times = repeat_presentation(layer, spikes, homeo, args.presentations, lr_w=lr_w)
            name = f"{'winner_decay' if decay else 'literal'}/{'frozen' if lr_w == 0 else 'stdp'}"
            traces[name] = times
            at = settle_point(times, homeo.t_expected, args.tol, args.hold)
            fired = np.isfinite(times[-50:])
            last = times[np.isfinite(times)][-1] if np.isfinite(times).any() else float("nan")
            print(f"{name.split('/')[0]:<14}{name.split('/')[1]:<9}{'never' if at is None else at:>11}"
                  f"{int(fired.sum()):>17}{last:>8.3f}")
    if args.trace:
        names = list(traces)
        with open(args.trace, "w") as fh:
            fh.write("presentation\t" + "\t".join(names) + "\n")
            for i in range(args.presentations):
                fh.write(f"{i}\t" + "\t".join(f"{traces[n][i]:.6f}" for n in names) + "\n")


if __name__ == "__main__":
    main()
