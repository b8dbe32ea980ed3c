"""Matrix Lie group kernels for SE(2), SO(3) and SE2(3).

Each group object exposes hat/vee between coordinate vectors and algebra
matrices, closed-form exp/log, the adjoint operators, and a polar
re-projection used after numerical integration.  Tangent coordinate
ordering is (rotation, velocity, position) for SE2(3) and
(rotation, translation) for SE(2); all downstream linearizations rely on
this ordering.
"""

import numpy as np

from .errors import BranchCutError, NotInAlgebraError, ProjectionError

# Group membership tolerance; checked against R^T R - I and structural rows.
GROUP_TOL = 1e-9

# Below this rotation magnitude the trigonometric coefficient functions
# switch to 4th-order Taylor expansions (cancellation in (1-cos)/theta^2).
SMALL_ANGLE = 1e-7

_J2 = np.array([[0.0, -1.0], [1.0, 0.0]])


def skew(w):
    """3x3 cross-product matrix of a 3-vector."""
    return np.array([
        [0.0, -w[2], w[1]],
        [w[2], 0.0, -w[0]],
        [-w[1], w[0], 0.0],
    ])


def unskew(W):
    return np.array([W[2, 1], W[0, 2], W[1, 0]])


def rot2(theta):
    """Planar rotation matrix of angle theta."""
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]])


def _sinc(t):
    # sin(t)/t
    if abs(t) < SMALL_ANGLE:
        t2 = t * t
        return 1.0 - t2 / 6.0 + t2 * t2 / 120.0
    return np.sin(t) / t


def _cosc(t):
    # (1 - cos(t))/t^2
    if abs(t) < SMALL_ANGLE:
        t2 = t * t
        return 0.5 - t2 / 24.0 + t2 * t2 / 720.0
    return (1.0 - np.cos(t)) / (t * t)


def _sincc(t):
    # (t - sin(t))/t^3
    if abs(t) < SMALL_ANGLE:
        t2 = t * t
        return 1.0 / 6.0 - t2 / 120.0 + t2 * t2 / 5040.0
    return (t - np.sin(t)) / (t ** 3)


def _half_cot(t):
    # (t/2) * cot(t/2); Taylor below threshold, the closed form divides
    # by 1 - cos(t) which cancels catastrophically near zero.
    if abs(t) < 1e-4:
        t2 = t * t
        return 1.0 - t2 / 12.0 - t2 * t2 / 720.0
    return 0.5 * t * np.sin(t) / (1.0 - np.cos(t))


def _project_rotation(R):
    """Nearest orthogonal matrix with determinant +1 (SVD polar factor).

    Broadcasts over stacked inputs (..., k, k).
    """
    U, s, Vt = np.linalg.svd(R)
    dist = np.linalg.norm(s - 1.0, axis=-1)
    if np.max(dist) > 0.1:
        raise ProjectionError(
            "rotation block is %.3g from orthogonal, beyond 0.1" % np.max(dist))
    sign = np.sign(np.linalg.det(U @ Vt))
    U = U.copy()
    U[..., :, -1] *= sign[..., None] if U.ndim > 2 else sign
    return U @ Vt


class MatrixLieGroup:
    """Base class; subclasses fix the matrix size and block layout."""

    name = ""
    n = 0       # embedded matrix size
    dof = 0     # Lie algebra dimension

    @property
    def identity(self):
        return np.eye(self.n)

    # -- subclass responsibilities ------------------------------------
    def hat(self, v):
        raise NotImplementedError

    def _vee_raw(self, M):
        raise NotImplementedError

    def exp(self, v):
        raise NotImplementedError

    def log(self, m):
        raise NotImplementedError

    def project(self, m):
        raise NotImplementedError

    def check_membership(self, m, tol=GROUP_TOL):
        raise NotImplementedError

    # -- generic machinery --------------------------------------------
    def _check_dim(self, v):
        v = np.asarray(v, dtype=float)
        if v.shape != (self.dof,):
            raise ValueError(
                "%s tangent vector must have shape (%d,), got %s"
                % (self.name, self.dof, v.shape))
        return v

    def vee(self, M, tol=1e-9):
        """Inverse of hat.  Raises if M is outside the algebra span."""
        M = np.asarray(M, dtype=float)
        v = self._vee_raw(M)
        residual = np.linalg.norm(M - self.hat(v))
        if residual > tol * max(1.0, np.linalg.norm(M)):
            raise NotInAlgebraError(
                "matrix is not in %s's algebra span (residual %.3g)"
                % (self.name, residual))
        return v

    def adjoint(self, m):
        """Adjoint of a group element: hat(Ad_m v) = m hat(v) m^-1."""
        m = np.asarray(m, dtype=float)
        m_inv = np.linalg.inv(m)
        cols = []
        for i in range(self.dof):
            e = np.zeros(self.dof)
            e[i] = 1.0
            cols.append(self._vee_raw(m @ self.hat(e) @ m_inv))
        return np.column_stack(cols)

    def adjoint_alg(self, x):
        """Algebra adjoint: hat(ad_x v) = [hat(x), hat(v)]."""
        X = self.hat(x)
        cols = []
        for i in range(self.dof):
            e = np.zeros(self.dof)
            e[i] = 1.0
            E = self.hat(e)
            cols.append(self._vee_raw(X @ E - E @ X))
        return np.column_stack(cols)

    def __repr__(self):
        return "<%s>" % self.name


class _SE2(MatrixLieGroup):
    """Direct planar isometries: 3x3 homogeneous matrices."""

    name = "SE2"
    n = 3
    dof = 3

    def hat(self, v):
        v = self._check_dim(v)
        th, u1, u2 = v
        return np.array([
            [0.0, -th, u1],
            [th, 0.0, u2],
            [0.0, 0.0, 0.0],
        ])

    def _vee_raw(self, M):
        return np.array([M[1, 0], M[0, 2], M[1, 2]])

    def exp(self, v):
        v = self._check_dim(v)
        th = v[0]
        V = _sinc(th) * np.eye(2) + th * _cosc(th) * _J2
        g = np.eye(3)
        g[:2, :2] = rot2(th)
        g[:2, 2] = V @ v[1:]
        return g

    def log(self, m):
        m = np.asarray(m, dtype=float)
        th = np.arctan2(m[1, 0], m[0, 0])
        if abs(th) >= np.pi - 1e-6:
            raise BranchCutError("SE2 rotation angle %.6f at branch cut" % th)
        Vinv = _half_cot(th) * np.eye(2) - 0.5 * th * _J2
        return np.concatenate(([th], Vinv @ m[:2, 2]))

    def project(self, m):
        m = np.asarray(m, dtype=float)
        g = np.zeros_like(m)
        g[..., :2, :2] = _project_rotation(m[..., :2, :2])
        g[..., :2, 2] = m[..., :2, 2]
        g[..., 2, 2] = 1.0
        return g

    def check_membership(self, m, tol=GROUP_TOL):
        m = np.asarray(m, dtype=float)
        R = m[:2, :2]
        return (np.linalg.norm(R.T @ R - np.eye(2)) <= tol
                and np.linalg.det(R) > 0
                and np.linalg.norm(m[2] - np.array([0.0, 0.0, 1.0])) <= tol)


class _SO3(MatrixLieGroup):
    """Spatial rotations: 3x3 orthogonal matrices with determinant +1."""

    name = "SO3"
    n = 3
    dof = 3

    def hat(self, v):
        return skew(self._check_dim(v))

    def _vee_raw(self, M):
        return unskew(0.5 * (M - M.T))

    def exp(self, v):
        v = self._check_dim(v)
        th = np.linalg.norm(v)
        K = skew(v)
        return np.eye(3) + _sinc(th) * K + _cosc(th) * K @ K

    def log(self, m):
        m = np.asarray(m, dtype=float)
        cos_th = np.clip(0.5 * (np.trace(m) - 1.0), -1.0, 1.0)
        th = np.arccos(cos_th)
        if th >= np.pi - 1e-6:
            raise BranchCutError("SO3 rotation angle %.6f at branch cut" % th)
        w = unskew(0.5 * (m - m.T))
        if th < SMALL_ANGLE:
            return w
        return (th / np.sin(th)) * w

    def project(self, m):
        return _project_rotation(np.asarray(m, dtype=float))

    def check_membership(self, m, tol=GROUP_TOL):
        m = np.asarray(m, dtype=float)
        return (np.linalg.norm(m.T @ m - np.eye(3)) <= tol
                and np.linalg.det(m) > 0)


def _so3_left_jacobian(w):
    th = np.linalg.norm(w)
    K = skew(w)
    return np.eye(3) + _cosc(th) * K + _sincc(th) * K @ K


def _so3_left_jacobian_inv(w):
    th = np.linalg.norm(w)
    K = skew(w)
    if th < SMALL_ANGLE:
        c = 1.0 / 12.0
    else:
        c = (1.0 - _half_cot(th)) / (th * th)
    return np.eye(3) - 0.5 * K + c * K @ K


class _SE23(MatrixLieGroup):
    """Double direct spatial isometries: 5x5 matrices carrying
    (rotation, velocity, position)."""

    name = "SE2_3"
    n = 5
    dof = 9

    def hat(self, v):
        v = self._check_dim(v)
        M = np.zeros((5, 5))
        M[:3, :3] = skew(v[:3])
        M[:3, 3] = v[3:6]
        M[:3, 4] = v[6:9]
        return M

    def _vee_raw(self, M):
        return np.concatenate([
            unskew(0.5 * (M[:3, :3] - M[:3, :3].T)), M[:3, 3], M[:3, 4]])

    def exp(self, v):
        v = self._check_dim(v)
        w = v[:3]
        R = SO3.exp(w)
        J = _so3_left_jacobian(w)
        g = np.eye(5)
        g[:3, :3] = R
        g[:3, 3] = J @ v[3:6]
        g[:3, 4] = J @ v[6:9]
        return g

    def log(self, m):
        m = np.asarray(m, dtype=float)
        w = SO3.log(m[:3, :3])
        Jinv = _so3_left_jacobian_inv(w)
        return np.concatenate([w, Jinv @ m[:3, 3], Jinv @ m[:3, 4]])

    def project(self, m):
        m = np.asarray(m, dtype=float)
        g = np.zeros_like(m)
        g[..., :3, :3] = _project_rotation(m[..., :3, :3])
        g[..., :3, 3] = m[..., :3, 3]
        g[..., :3, 4] = m[..., :3, 4]
        g[..., 3, 3] = 1.0
        g[..., 4, 4] = 1.0
        return g

    def check_membership(self, m, tol=GROUP_TOL):
        m = np.asarray(m, dtype=float)
        R = m[:3, :3]
        bottom = np.zeros((2, 5))
        bottom[0, 3] = 1.0
        bottom[1, 4] = 1.0
        return (np.linalg.norm(R.T @ R - np.eye(3)) <= tol
                and np.linalg.det(R) > 0
                and np.linalg.norm(m[3:] - bottom) <= tol)


SE2 = _SE2()
SO3 = _SO3()
SE23 = _SE23()

GROUPS = {g.name: g for g in (SE2, SO3, SE23)}
