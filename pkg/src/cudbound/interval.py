from dataclasses import asdict, dataclass


@dataclass(frozen=True)
class ConfidenceInterval:
    """A confidence set ``[lower, upper]`` for an error rate, clipped to [0, 1].

    ``flags`` carries method-specific diagnostics (e.g. ``"inexact"`` for an
    incomplete branch-and-bound, ``"bc_fallback"`` for a corrected bootstrap
    that fell back to plain quantiles).
    """

    center: float
    half_width: float
    lower: float
    upper: float
    method: str
    level: float
    flags: tuple = ()

    @classmethod
    def symmetric(cls, center, half_width, method, level, flags=()):
        center = min(max(float(center), 0.0), 1.0)
        half_width = max(float(half_width), 0.0)
        return cls(
            center=center,
            half_width=half_width,
            lower=max(center - half_width, 0.0),
            upper=min(center + half_width, 1.0),
            method=method,
            level=float(level),
            flags=tuple(flags),
        )

    @classmethod
    def from_bounds(cls, lower, upper, center, method, level, flags=()):
        lower = min(max(float(lower), 0.0), 1.0)
        upper = min(max(float(upper), 0.0), 1.0)
        if upper < lower:
            lower = upper = (lower + upper) / 2
        # the reported point estimate is pulled inside the set when it falls outside
        center = min(max(float(center), lower), upper)
        return cls(
            center=center,
            half_width=(upper - lower) / 2,
            lower=lower,
            upper=upper,
            method=method,
            level=float(level),
            flags=tuple(flags),
        )

    @property
    def diameter(self):
        return self.upper - self.lower

    def contains(self, value):
        return self.lower <= value <= self.upper

    def to_dict(self):
        d = asdict(self)
        d["flags"] = list(self.flags)
        return d
