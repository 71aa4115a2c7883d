"""SplitMix64 stream shared bit-for-bit by the compiled core and the fallback."""

MASK64 = 0xFFFFFFFFFFFFFFFF
GOLDEN = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB
_TWO_M53 = 2.0 ** -53


def mix64(z):
    """SplitMix64 finalizer; a bijection on 64-bit integers."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * _M1) & MASK64
    z = ((z ^ (z >> 27)) * _M2) & MASK64
    return z ^ (z >> 31)


def derive_seed(master_seed, index):
    """Seed of sub-stream ``index``; injective in ``index`` for a fixed master."""
    return mix64((master_seed + (index + 1) * GOLDEN) & MASK64)


class SplitMix64:
    """Counter-based 64-bit generator.

    The whole state is one unsigned 64-bit counter, so it can be handed to the
    compiled core as a ``uint64`` and read back afterwards.
    """

    __slots__ = ("state",)

    def __init__(self, seed=0):
        self.state = int(seed) & MASK64

    def next_u64(self):
        self.state = (self.state + GOLDEN) & MASK64
        return mix64(self.state)

    def random(self):
        """Uniform double in [0, 1) with 53 random bits."""
        return (self.next_u64() >> 11) * _TWO_M53

    def randbelow(self, k):
        return int(self.random() * k)

    def choice(self, cdf):
        """Index drawn from a cumulative distribution (last entry must be 1)."""
        return bisect_cdf(cdf, 0, len(cdf), self.random())

    def permutation(self, n):
        perm = list(range(n))
        shuffle_inplace(self, perm)
        return perm


def bisect_cdf(cdf, start, end, u):
    """First index in ``cdf[start:end]`` whose value exceeds ``u``, clamped to ``end - 1``."""
    lo, hi = start, end - 1
    while lo < hi:
        mid = (lo + hi) // 2
        if u < cdf[mid]:
            hi = mid
        else:
            lo = mid + 1
    return lo


def shuffle_inplace(rng, seq):
    # Fisher-Yates, high index first; the compiled core uses the same order
    for i in range(len(seq) - 1, 0, -1):
        j = rng.randbelow(i + 1)
        seq[i], seq[j] = seq[j], seq[i]
