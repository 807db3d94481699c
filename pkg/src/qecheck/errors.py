"""Exception types shared across the package."""


class QecheckError(Exception):
    """Base class for all errors raised by this package."""


class ExprError(QecheckError):
    """Base class for expression parsing/evaluation errors."""


class ExprSyntaxError(ExprError):
    def __init__(self, message, src, pos):
        self.src = src
        self.pos = pos
        super().__init__(f"{message} at position {pos}: {src!r}")


class UnknownSymbolError(ExprError):
    def __init__(self, name, src=None, pos=None):
        self.name = name
        self.pos = pos
        loc = f" at position {pos}" if pos is not None else ""
        super().__init__(f"unknown symbol {name!r}{loc}")


class EvalDomainError(ExprError):
    """Evaluation left the domain of a function (log of non-positive, 1/0, ...)."""

    def __init__(self, message, point=None):
        self.point = point
        where = f" at point {tuple(point)}" if point is not None else ""
        super().__init__(f"{message}{where}")


class JetOrderError(QecheckError):
    """A computation needs derivatives of higher order than the jet carries."""


class NotPositiveDefiniteError(QecheckError):
    def __init__(self, point, eigenvalues=None):
        self.point = point
        self.eigenvalues = eigenvalues
        extra = f" (eigenvalues {eigenvalues})" if eigenvalues is not None else ""
        super().__init__(f"metric not positive definite at {tuple(point)}{extra}")


class DimensionError(QecheckError):
    """Operation undefined in this chart dimension (e.g. Schouten at n = 2)."""


class ExcludedDimensionError(QecheckError):
    """The dimensional parameter m hits an excluded value for this operation."""

    def __init__(self, m, n, detail=""):
        self.m = m
        self.n = n
        extra = f": {detail}" if detail else ""
        super().__init__(f"dimensional parameter m={m} excluded for n={n}{extra}")


class ScaleMismatchError(QecheckError):
    """Tractor arithmetic attempted across different scales."""

    def __init__(self, tag_a, tag_b):
        super().__init__(f"scale mismatch: {tag_a!r} vs {tag_b!r}")


class NotWeaklyGenericError(QecheckError):
    """Curvature inversion requested at a point that is not weakly generic."""


class InputError(QecheckError):
    """Malformed manifold file or incompatible command options."""

    def __init__(self, message, line=None):
        self.line = line
        where = f" (line {line})" if line is not None else ""
        super().__init__(f"{message}{where}")
