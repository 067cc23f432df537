"""Almost complex structures on ℂⁿ and their complex representation.

A structure J close to the standard one J_st (multiplication by i) is
represented by a matrix field A(z) such that a map u is J-holomorphic
exactly when

    u_ζ̄ + A(u) conj(u_ζ) = 0.

Real coordinates are ordered ``[Re z; Im z]`` throughout, so that J_st is
``[[0, -I], [I, 0]]`` and conjugation is ``diag(I, -I)``.  The chart is

    X = (J_st + J)^{-1} (J - J_st),    A = complex form of X ∘ conj,

with inverse J = J_st (I + X)(I - X)^{-1}; it requires det(J_st + J) ≠ 0.
Admissibility asks det(I - A conj(A)) to stay away from 0, which is what the local
substitution used by the right inverse needs.

Evaluations act on point arrays ``z`` of shape ``(P, n)`` and return
``(P, n, n)`` for A and ``(P, n, n, n)`` for derivatives, indexed
``[p, row, col, j]`` with j the differentiation variable.
"""

from __future__ import annotations

import json

import numpy as np

from .errors import AdmissibilityViolation, ChartError, DomainError, NotAStructure

__all__ = [
    "StructureSpec",
    "StandardStructure",
    "PolynomialStructure",
    "ExampleR6Structure",
    "TableStructure",
    "eval_builtin_r6",
    "j_to_a",
    "a_to_j",
    "admissibility_margin",
    "check_admissible",
    "admissibility",
    "load_structure",
]


def _points(z, n):
    z = np.asarray(z, dtype=complex)
    if z.ndim == 1:
        z = z[None]
    if z.shape[-1] != n:
        raise ValueError(f"expected points with {n} components, got shape {z.shape}")
    return z


class StructureSpec:
    """Base class.  Subclasses provide ``A`` and optionally ``dA``."""

    kind = "abstract"

    def __init__(self, n):
        self.n = int(n)

    def A(self, z):
        raise NotImplementedError

    def dA(self, z):
        """Wirtinger derivatives (∂A/∂z_j, ∂A/∂conj(z_j)) by central differences."""
        return _fd_wirtinger(self.A, _points(z, self.n), self.n)

    def check_domain(self, z):
        """Raise DomainError if a point lies outside the region of definition."""

    def is_standard(self):
        return False

    def to_dict(self):
        raise TypeError(f"structure kind {self.kind!r} is not serializable")

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":")) + "\n"


def _fd_wirtinger(fn, z, n, h=1e-5):
    P = z.shape[0]
    dz = np.zeros((P, n, n, n), dtype=complex)
    dzb = np.zeros_like(dz)
    for j in range(n):
        e = np.zeros(n)
        e[j] = h
        dx = (fn(z + e) - fn(z - e)) / (2 * h)
        dy = (fn(z + 1j * e) - fn(z - 1j * e)) / (2 * h)
        dz[..., j] = 0.5 * (dx - 1j * dy)
        dzb[..., j] = 0.5 * (dx + 1j * dy)
    return dz, dzb


class StandardStructure(StructureSpec):
    kind = "standard"

    def A(self, z):
        z = _points(z, self.n)
        return np.zeros((z.shape[0], self.n, self.n), dtype=complex)

    def dA(self, z):
        z = _points(z, self.n)
        out = np.zeros((z.shape[0], self.n, self.n, self.n), dtype=complex)
        return out, out.copy()

    def is_standard(self):
        return True

    def to_dict(self):
        return {"kind": "standard", "n": self.n}


class PolynomialStructure(StructureSpec):
    """Entries are polynomials in z and conj(z).

    ``entries`` maps ``(row, col)`` to a list of terms
    ``(coeff, zpow, zbpow)`` with exponent tuples of length n.
    """

    kind = "polynomial"

    def __init__(self, n, entries):
        super().__init__(n)
        self.entries = {}
        for (a, b), terms in entries.items():
            clean = []
            for coeff, zp, zbp in terms:
                zp = tuple(int(t) for t in zp)
                zbp = tuple(int(t) for t in zbp)
                if len(zp) != self.n or len(zbp) != self.n or min(zp + zbp) < 0:
                    raise ValueError(f"bad exponents in entry {(a, b)}")
                clean.append((complex(coeff), zp, zbp))
            self.entries[(int(a), int(b))] = clean

    def _monomial(self, z, zp, zbp):
        return np.prod(z ** np.array(zp) * np.conj(z) ** np.array(zbp), axis=-1)

    def A(self, z):
        z = _points(z, self.n)
        out = np.zeros((z.shape[0], self.n, self.n), dtype=complex)
        for (a, b), terms in self.entries.items():
            for c, zp, zbp in terms:
                out[:, a, b] += c * self._monomial(z, zp, zbp)
        return out

    def dA(self, z):
        z = _points(z, self.n)
        P = z.shape[0]
        dz = np.zeros((P, self.n, self.n, self.n), dtype=complex)
        dzb = np.zeros_like(dz)
        for (a, b), terms in self.entries.items():
            for c, zp, zbp in terms:
                for j in range(self.n):
                    if zp[j]:
                        lowered = list(zp)
                        lowered[j] -= 1
                        dz[:, a, b, j] += c * zp[j] * self._monomial(z, lowered, zbp)
                    if zbp[j]:
                        lowered = list(zbp)
                        lowered[j] -= 1
                        dzb[:, a, b, j] += c * zbp[j] * self._monomial(z, zp, lowered)
        return dz, dzb

    def is_standard(self):
        return all(c == 0 for terms in self.entries.values() for c, _, _ in terms)

    def to_dict(self):
        return {
            "kind": "polynomial",
            "n": self.n,
            "entries": [
                {
                    "row": a,
                    "col": b,
                    "terms": [
                        {"coeff": [c.real, c.imag], "powers_z": list(zp), "powers_zbar": list(zbp)}
                        for c, zp, zbp in terms
                    ],
                }
                for (a, b), terms in sorted(self.entries.items())
            ],
        }


_R6_POLE = 3.0 ** 0.25


def eval_builtin_r6(z, scale21=1.0, coeff31=-1.0):
    """The rational structure on ℂ³ with

        A[1, 0] = 6 z1² z3 / (3 - z1² conj(z1)²),    A[2, 0] = -z2,

    all other entries zero (rows and columns counted from 0).  ``scale21`` and
    ``coeff31`` rescale the two entries; the defaults give the standard
    example.  The pole sits on |z1| = 3^{1/4}.
    """
    z = _points(z, 3)
    z1, z2, z3 = z[:, 0], z[:, 1], z[:, 2]
    _guard_r6(z1)
    D = 3.0 - z1**2 * np.conj(z1) ** 2
    out = np.zeros((z.shape[0], 3, 3), dtype=complex)
    out[:, 1, 0] = scale21 * 6.0 * z1**2 * z3 / D
    out[:, 2, 0] = coeff31 * z2
    return out


def _guard_r6(z1, rel=1e-9):
    m = np.abs(z1)
    if np.any(m >= _R6_POLE * (1.0 - rel)):
        raise DomainError(f"|z1| = {m.max():.6g} reaches the pole circle |z1| = 3^(1/4)")


class ExampleR6Structure(StructureSpec):
    kind = "builtin_example_r6"

    def __init__(self, scale21=1.0, coeff31=-1.0):
        super().__init__(3)
        self.scale21 = float(scale21)
        self.coeff31 = complex(coeff31)

    def A(self, z):
        return eval_builtin_r6(z, self.scale21, self.coeff31)

    def dA(self, z):
        z = _points(z, 3)
        z1, z3 = z[:, 0], z[:, 2]
        _guard_r6(z1)
        zb1 = np.conj(z1)
        D = 3.0 - z1**2 * zb1**2
        s = self.scale21
        P = z.shape[0]
        dz = np.zeros((P, 3, 3, 3), dtype=complex)
        dzb = np.zeros_like(dz)
        dz[:, 1, 0, 0] = s * (12.0 * z1 * z3 / D + 12.0 * z1**3 * zb1**2 * z3 / D**2)
        dz[:, 1, 0, 2] = s * 6.0 * z1**2 / D
        dzb[:, 1, 0, 0] = s * 12.0 * z1**4 * zb1 * z3 / D**2
        dz[:, 2, 0, 1] = self.coeff31
        return dz, dzb

    def check_domain(self, z):
        _guard_r6(_points(z, 3)[:, 0])

    def to_dict(self):
        out = {"kind": "builtin_example_r6", "builtin": "example_r6", "n": 3}
        if self.scale21 != 1.0 or self.coeff31 != -1.0:
            out["scale21"] = self.scale21
            out["coeff31"] = [self.coeff31.real, self.coeff31.imag]
        return out


class TableStructure(StructureSpec):
    """A structure given by callables (a "rational table").

    ``entries`` returns A at points ``(P, n)``.  Derivatives default to
    central differences with step 1e-5 unless ``derivatives`` is given.
    """

    kind = "rational_table"

    def __init__(self, n, entries, derivatives=None, domain=None):
        super().__init__(n)
        self._entries = entries
        self._derivatives = derivatives
        self._domain = domain

    def A(self, z):
        z = _points(z, self.n)
        self.check_domain(z)
        return np.asarray(self._entries(z), dtype=complex)

    def dA(self, z):
        z = _points(z, self.n)
        if self._derivatives is not None:
            return self._derivatives(z)
        return _fd_wirtinger(self.A, z, self.n)

    def check_domain(self, z):
        if self._domain is not None and not np.all(self._domain(_points(z, self.n))):
            raise DomainError("point outside the region where the structure is defined")


def load_structure(data):
    """Build a structure from its JSON dictionary (or a JSON string)."""
    if isinstance(data, str):
        data = json.loads(data)
    kind = data.get("kind")
    if kind == "standard":
        return StandardStructure(int(data["n"]))
    if kind == "builtin_example_r6" or (kind == "builtin" and data.get("builtin") == "example_r6"):
        c = data.get("coeff31", [-1.0, 0.0])
        c = complex(*c) if isinstance(c, list) else complex(c)
        return ExampleR6Structure(float(data.get("scale21", 1.0)), c)
    if kind == "polynomial":
        entries = {}
        for e in data["entries"]:
            terms = []
            for t in e["terms"]:
                c = t["coeff"]
                c = complex(*c) if isinstance(c, list) else complex(c)
                terms.append((c, t["powers_z"], t["powers_zbar"]))
            entries[(int(e["row"]), int(e["col"]))] = terms
        return PolynomialStructure(int(data["n"]), entries)
    raise ValueError(f"unknown or non-serializable structure kind {kind!r}")


# -- chart J <-> A ----------------------------------------------------------------


def _jst(n):
    Z = np.zeros((n, n))
    I = np.eye(n)
    return np.block([[Z, -I], [I, Z]])


def _conj_matrix(n):
    return np.diag(np.concatenate([np.ones(n), -np.ones(n)]))


def j_to_a(J, tol=1e-10, max_cond=1e8):
    """Complex matrix A of a real 2n×2n structure J with J² = -I."""
    J = np.asarray(J, dtype=float)
    m = J.shape[0]
    if J.shape != (m, m) or m % 2:
        raise NotAStructure("J must be a square matrix of even size")
    n = m // 2
    scale = max(1.0, float(np.linalg.norm(J, 2)) ** 2)
    if np.linalg.norm(J @ J + np.eye(m), 2) > tol * scale:
        raise NotAStructure("J² ≠ -I")
    S = _jst(n) + J
    if np.linalg.cond(S) > max_cond:
        raise ChartError("J_st + J is singular; J is not in the chart around J_st")
    X = np.linalg.solve(S, J - _jst(n)) @ _conj_matrix(n)
    A = X[:n, :n] + 1j * X[n:, :n]
    linear = np.block([[A.real, -A.imag], [A.imag, A.real]])
    if np.linalg.norm(X - linear, 2) > 1e-8 * max(1.0, np.linalg.norm(X, 2)):
        raise ChartError("chart image is not complex-linear")
    return A


def a_to_j(A):
    """Inverse of :func:`j_to_a`."""
    A = np.atleast_2d(np.asarray(A, dtype=complex))
    n = A.shape[0]
    X = np.block([[A.real, -A.imag], [A.imag, A.real]]) @ _conj_matrix(n)
    I = np.eye(2 * n)
    if np.linalg.cond(I - X) > 1e12:
        raise ChartError("I - X is singular")
    return _jst(n) @ (I + X) @ np.linalg.inv(I - X)


def admissibility_margin(A):
    """|det(I - A conj(A))|, pointwise over a leading axis."""
    A = np.asarray(A, dtype=complex)
    if A.ndim == 2:
        A = A[None]
    n = A.shape[-1]
    return np.abs(np.linalg.det(np.eye(n) - A @ np.conj(A)))


def check_admissible(A, points=None, eps=1e-6):
    """Minimum margin over the points; raises if it falls below ``eps``.

    ``A`` is either an array of matrices or a structure, in which case it is
    evaluated at ``points``.
    """
    if isinstance(A, StructureSpec):
        A = A.A(points)
    margins = admissibility_margin(A)
    k = int(np.argmin(margins))
    if margins[k] < eps:
        where = None if points is None else np.asarray(points)[k]
        raise AdmissibilityViolation(
            f"I - A conj(A) is near singular (margin {margins[k]:.3g})", point=where, margin=float(margins[k])
        )
    return float(margins.min())


admissibility = check_admissible
