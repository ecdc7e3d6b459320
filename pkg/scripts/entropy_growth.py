"""Print net log-sizes and fitted growth exponents for the Wasserstein and mixture nets.

    python3 scripts/entropy_growth.py
"""

from laplace_deconv.entropy import (
    growth_exponent,
    mixture_log_scale,
    mixture_net,
    wasserstein_log_scale,
    wasserstein_net,
)
from laplace_deconv.kernels import laplace

W_LADDER = (0.4, 0.2, 0.1, 0.05)
H_LADDERS = ((0.3, 0.2, 0.1), (0.2, 0.1, 0.05), (0.1, 0.05, 0.025))


def main():
    sizes = {e: wasserstein_net(1.0, 1.0, e).log_size for e in W_LADDER}
    print("W1 nets, a=1:")
    for e, s in sizes.items():
        print(f"  eps={e:<6} log N={s:9.3f}")
    for lo in range(len(W_LADDER) - 2):
        eps = W_LADDER[lo : lo + 3]
        g = growth_exponent(eps, [sizes[e] for e in eps], wasserstein_log_scale(1.0))
        print(f"  growth on {eps}: {g:.3f}  (target 1)")

    print("Hellinger mixture nets, Laplace kernel, a=1:")
    kern = laplace()
    for eps in H_LADDERS:
        s = [mixture_net(1.0, kern, "hellinger", e).log_size for e in eps]
        g = growth_exponent(eps, s, mixture_log_scale(1.0))
        print(f"  log N on {eps}: {[round(v, 2) for v in s]}  growth {g:.3f}")


if __name__ == "__main__":
    main()
