"""Minimal sparse and block-diagonal linear algebra.

Everything here is deterministic by construction: sparse entries are
stored in compressed sparse row layout with strictly increasing column
indices, duplicate contributions are summed in ascending (row, column,
insertion) order, and matrix-vector products accumulate left to right
within each row.  Repeated runs on identical inputs therefore produce
bit-identical value arrays.
"""

from __future__ import annotations

import numpy as np

# Entries smaller than this fraction of the largest magnitude are
# dropped during sparse construction so that structural zeros (exact
# cancellations) do not pollute sparsity patterns.
DROP_TOLERANCE = 1e-14


class IterationError(RuntimeError):
    """An iterative solver failed to converge; carries the last residual."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class AssemblyDegeneracyError(RuntimeError):
    """A vertex block of the lumped mass matrix is not positive definite."""

    def __init__(self, message, vertex=None):
        super().__init__(message)
        self.vertex = vertex


class SparseMatrix:
    """Compressed sparse row matrix with fixed summation order."""

    __slots__ = ("rows", "cols", "indptr", "indices", "data", "_row_of_nnz")

    def __init__(self, rows, cols, indptr, indices, data):
        self.rows = int(rows)
        self.cols = int(cols)
        self.indptr = np.asarray(indptr, dtype=np.int64)
        self.indices = np.asarray(indices, dtype=np.int64)
        self.data = np.asarray(data, dtype=float)
        self._row_of_nnz = None

    # -- construction --------------------------------------------------
    @classmethod
    def from_coo(cls, row_ids, col_ids, values, shape, drop_tol=DROP_TOLERANCE):
        """Build from coordinate triplets, summing duplicates.

        Triplets are sorted by (row, column); equal positions are summed
        in their sorted order.  Entries with magnitude below
        ``drop_tol`` times the largest magnitude are discarded.
        """
        rows, cols = shape
        r = np.asarray(row_ids, dtype=np.int64)
        c = np.asarray(col_ids, dtype=np.int64)
        v = np.asarray(values, dtype=float)
        if r.size:
            if r.min() < 0 or r.max() >= rows or c.min() < 0 or c.max() >= cols:
                raise ValueError("coordinate outside matrix shape")
            order = np.lexsort((c, r))
            r, c, v = r[order], c[order], v[order]
            new_group = np.empty(r.size, dtype=bool)
            new_group[0] = True
            new_group[1:] = (r[1:] != r[:-1]) | (c[1:] != c[:-1])
            starts = np.flatnonzero(new_group)
            summed = np.add.reduceat(v, starts)
            r, c = r[starts], c[starts]
            v = summed
            if v.size and drop_tol > 0.0:
                scale = np.max(np.abs(v))
                keep = np.abs(v) >= drop_tol * scale
                r, c, v = r[keep], c[keep], v[keep]
            elif v.size:
                keep = v != 0.0
                r, c, v = r[keep], c[keep], v[keep]
        counts = np.bincount(r, minlength=rows)
        indptr = np.zeros(rows + 1, dtype=np.int64)
        np.cumsum(counts, out=indptr[1:])
        return cls(rows, cols, indptr, c, v)

    @classmethod
    def from_dense(cls, array, drop_tol=0.0):
        a = np.asarray(array, dtype=float)
        r, c = np.nonzero(a)
        return cls.from_coo(r, c, a[r, c], a.shape, drop_tol=drop_tol)

    @classmethod
    def identity(cls, n):
        idx = np.arange(n, dtype=np.int64)
        return cls(n, n, np.arange(n + 1, dtype=np.int64), idx, np.ones(n))

    @classmethod
    def zeros(cls, rows, cols):
        return cls(rows, cols, np.zeros(rows + 1, dtype=np.int64),
                   np.zeros(0, dtype=np.int64), np.zeros(0))

    # -- basic queries ---------------------------------------------------
    @property
    def shape(self):
        return (self.rows, self.cols)

    @property
    def nnz(self):
        return len(self.data)

    def to_dense(self):
        out = np.zeros((self.rows, self.cols))
        for i in range(self.rows):
            sl = slice(self.indptr[i], self.indptr[i + 1])
            out[i, self.indices[sl]] = self.data[sl]
        return out

    def _nnz_rows(self):
        if self._row_of_nnz is None:
            self._row_of_nnz = np.repeat(
                np.arange(self.rows, dtype=np.int64), np.diff(self.indptr))
        return self._row_of_nnz

    # -- operations ------------------------------------------------------
    def matvec(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape != (self.cols,):
            raise ValueError(
                f"shape mismatch: matrix is {self.rows}x{self.cols}, "
                f"vector has length {x.shape}")
        if self.nnz == 0:
            return np.zeros(self.rows)
        # bincount accumulates in storage order: ascending column per row.
        return np.bincount(self._nnz_rows(), weights=self.data * x[self.indices],
                           minlength=self.rows)

    def transpose(self):
        return SparseMatrix.from_coo(self.indices, self._nnz_rows(), self.data,
                                     (self.cols, self.rows), drop_tol=0.0)

    def scale_rows(self, diag):
        diag = np.asarray(diag, dtype=float)
        if diag.shape != (self.rows,):
            raise ValueError("row scaling vector has wrong length")
        data = self.data * diag[self._nnz_rows()]
        return SparseMatrix(self.rows, self.cols, self.indptr.copy(),
                            self.indices.copy(), data)

    def matmul(self, other):
        """Sparse-sparse product (row-wise, deterministic accumulation)."""
        if self.cols != other.rows:
            raise ValueError(
                f"shape mismatch in product: {self.shape} @ {other.shape}")
        out_r, out_c, out_v = [], [], []
        for i in range(self.rows):
            acc = {}
            for p in range(self.indptr[i], self.indptr[i + 1]):
                k = self.indices[p]
                a = self.data[p]
                for q in range(other.indptr[k], other.indptr[k + 1]):
                    j = other.indices[q]
                    acc[j] = acc.get(j, 0.0) + a * other.data[q]
            for j in sorted(acc):
                out_r.append(i)
                out_c.append(j)
                out_v.append(acc[j])
        return SparseMatrix.from_coo(out_r, out_c, out_v,
                                     (self.rows, other.cols), drop_tol=0.0)

    def symmetrized(self, rel_tol=1e-13):
        """Average with the transpose after checking near-symmetry."""
        if self.rows != self.cols:
            raise ValueError("only square matrices can be symmetrized")
        t = self.transpose()
        scale = float(np.max(np.abs(self.data))) if self.nnz else 0.0
        dense_check = None
        if self.nnz:
            diff = _max_abs_difference(self, t)
            if diff > rel_tol * max(scale, 1e-300):
                raise ValueError(
                    f"matrix is not numerically symmetric: max asymmetry "
                    f"{diff:g} exceeds {rel_tol:g} * {scale:g}")
        del dense_check
        r = np.concatenate([self._nnz_rows(), t._nnz_rows()])
        c = np.concatenate([self.indices, t.indices])
        v = np.concatenate([0.5 * self.data, 0.5 * t.data])
        return SparseMatrix.from_coo(r, c, v, self.shape, drop_tol=0.0)

    # -- text dump ---------------------------------------------------------
    def dump_coo(self, stream):
        """Write 'rows cols nnz' then one 'i j value' line per entry."""
        stream.write(f"{self.rows} {self.cols} {self.nnz}\n")
        rows = self._nnz_rows()
        for i, j, v in zip(rows, self.indices, self.data):
            stream.write(f"{i} {j} {v:.17g}\n")

    @classmethod
    def read_coo(cls, stream):
        header = stream.readline().split()
        if len(header) != 3:
            raise ValueError("coordinate dump must start with 'rows cols nnz'")
        rows, cols, nnz = (int(h) for h in header)
        r, c, v = [], [], []
        for _ in range(nnz):
            parts = stream.readline().split()
            r.append(int(parts[0]))
            c.append(int(parts[1]))
            v.append(float(parts[2]))
        return cls.from_coo(r, c, v, (rows, cols), drop_tol=0.0)


def _max_abs_difference(a, b):
    r = np.concatenate([a._nnz_rows(), b._nnz_rows()])
    c = np.concatenate([a.indices, b.indices])
    v = np.concatenate([a.data, -b.data])
    diff = SparseMatrix.from_coo(r, c, v, a.shape, drop_tol=0.0)
    return float(np.max(np.abs(diff.data))) if diff.nnz else 0.0


def spmv(matrix, x):
    """Sparse matrix-vector product (deterministic summation order)."""
    return matrix.matvec(x)


class DiagonalMatrix:
    """Diagonal matrix with strictly positive entries."""

    __slots__ = ("values",)

    def __init__(self, values, require_positive=True):
        self.values = np.asarray(values, dtype=float).copy()
        if self.values.ndim != 1:
            raise ValueError("diagonal must be a vector")
        if require_positive and self.values.size and np.min(self.values) <= 0.0:
            raise ValueError("diagonal entries must be positive")
        self.values.setflags(write=False)

    @property
    def shape(self):
        n = len(self.values)
        return (n, n)

    def apply(self, x):
        return self.values * np.asarray(x, dtype=float)

    def inverse(self):
        return DiagonalMatrix(1.0 / self.values)

    def to_sparse(self):
        n = len(self.values)
        return SparseMatrix(n, n, np.arange(n + 1, dtype=np.int64),
                            np.arange(n, dtype=np.int64), self.values.copy())


class VertexBlockMatrix:
    """Symmetric block-diagonal matrix whose blocks sit on mesh vertices.

    ``vertex_ids[k]`` names the vertex of block k, ``half_ids[k]`` the
    ascending global indices of the degrees of freedom it couples, and
    ``blocks[k]`` the dense symmetric block.
    """

    def __init__(self, n, vertex_ids, half_ids, blocks, symmetry_tol=1e-14):
        self.n = int(n)
        self.vertex_ids = list(vertex_ids)
        self.half_ids = [np.asarray(h, dtype=np.int64) for h in half_ids]
        self.blocks = [np.asarray(b, dtype=float) for b in blocks]
        owner = np.full(self.n, -1, dtype=np.int64)
        self.pos_in_block = np.full(self.n, -1, dtype=np.int64)
        for k, halves in enumerate(self.half_ids):
            b = self.blocks[k]
            if b.shape != (len(halves), len(halves)):
                raise ValueError(f"block {k} shape mismatch")
            scale = max(float(np.max(np.abs(b))) if b.size else 0.0, 1e-300)
            if b.size and float(np.max(np.abs(b - b.T))) > symmetry_tol * scale:
                raise ValueError(
                    f"block at vertex {self.vertex_ids[k]} is not symmetric")
            for pos, h in enumerate(halves):
                if owner[h] != -1:
                    raise ValueError(f"degree of freedom {h} in two blocks")
                owner[h] = k
                self.pos_in_block[h] = pos
        if self.n and np.any(owner < 0):
            missing = int(np.flatnonzero(owner < 0)[0])
            raise ValueError(f"degree of freedom {missing} not in any block")
        self.block_of_half = owner

    @property
    def shape(self):
        return (self.n, self.n)

    def apply(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape != (self.n,):
            raise ValueError("vector length does not match block matrix size")
        out = np.zeros(self.n)
        for halves, block in zip(self.half_ids, self.blocks):
            out[halves] = block @ x[halves]
        return out

    def invert(self):
        """Per-block dense inverse via Cholesky factorization.

        Raises ``AssemblyDegeneracyError`` naming the vertex whose block
        is not symmetric positive definite.
        """
        inverses = []
        for vid, block in zip(self.vertex_ids, self.blocks):
            try:
                chol = np.linalg.cholesky(block)
            except np.linalg.LinAlgError:
                raise AssemblyDegeneracyError(
                    f"mass block at vertex {vid} is not positive definite",
                    vertex=vid) from None
            inv_chol = np.linalg.inv(chol)
            inverses.append(inv_chol.T @ inv_chol)
        return VertexBlockMatrix(self.n, self.vertex_ids, self.half_ids,
                                 inverses)

    def to_sparse(self):
        r, c, v = [], [], []
        for halves, block in zip(self.half_ids, self.blocks):
            for a, ga in enumerate(halves):
                for b, gb in enumerate(halves):
                    r.append(ga)
                    c.append(gb)
                    v.append(block[a, b])
        return SparseMatrix.from_coo(r, c, v, (self.n, self.n), drop_tol=0.0)

    def max_block_size(self):
        return max((len(h) for h in self.half_ids), default=0)


def invert_blocks(matrix):
    """Invert a :class:`VertexBlockMatrix` block by block."""
    return matrix.invert()


def triple_product(projection, block_inverse):
    """Explicit sparse product  projection @ block_inverse @ projection^T.

    The result is symmetrized by averaging (the inputs make it symmetric
    up to roundoff) and run through the drop-tolerance policy so exact
    structural zeros disappear from the pattern.
    """
    if projection.cols != block_inverse.n:
        raise ValueError(
            f"shape mismatch: projection has {projection.cols} columns, "
            f"block matrix is {block_inverse.n} x {block_inverse.n}")
    pt = projection.transpose()
    r_out, c_out, v_out = [], [], []
    for halves, block in zip(block_inverse.half_ids, block_inverse.blocks):
        row_ids = []
        seen = {}
        for h in halves:
            for p in range(pt.indptr[h], pt.indptr[h + 1]):
                i = int(pt.indices[p])
                if i not in seen:
                    seen[i] = len(row_ids)
                    row_ids.append(i)
        if not row_ids:
            continue
        s = np.zeros((len(row_ids), len(halves)))
        for k, h in enumerate(halves):
            for p in range(pt.indptr[h], pt.indptr[h + 1]):
                s[seen[int(pt.indices[p])], k] = pt.data[p]
        contrib = s @ block @ s.T
        for a, ia in enumerate(row_ids):
            for b, ib in enumerate(row_ids):
                r_out.append(ia)
                c_out.append(ib)
                v_out.append(contrib[a, b])
    result = SparseMatrix.from_coo(r_out, c_out, v_out,
                                   (projection.rows, projection.rows))
    return result.symmetrized()


def conjugate_gradient(apply_a, b, tol=1e-12, max_iter=1000, x0=None):
    """Solve A x = b for symmetric positive definite A given as a callable.

    Stops when the residual norm drops below ``tol`` times the norm of
    ``b``; raises :class:`IterationError` with the final residual
    otherwise.
    """
    b = np.asarray(b, dtype=float)
    norm_b = float(np.linalg.norm(b))
    if norm_b == 0.0:
        return np.zeros_like(b)
    x = np.zeros_like(b) if x0 is None else np.array(x0, dtype=float)
    r = b - apply_a(x)
    p = r.copy()
    rs = float(r @ r)
    for _ in range(max_iter):
        if np.sqrt(rs) <= tol * norm_b:
            return x
        ap = apply_a(p)
        denom = float(p @ ap)
        if denom <= 0.0:
            raise IterationError(
                "conjugate gradient hit a non-positive curvature direction; "
                "operator is not positive definite",
                residual=float(np.sqrt(rs)))
        alpha = rs / denom
        x = x + alpha * p
        r = r - alpha * ap
        rs_new = float(r @ r)
        p = r + (rs_new / rs) * p
        rs = rs_new
    if np.sqrt(rs) <= tol * norm_b:
        return x
    raise IterationError(
        f"conjugate gradient did not converge in {max_iter} iterations "
        f"(residual {np.sqrt(rs):g}, target {tol * norm_b:g})",
        residual=float(np.sqrt(rs)))


def power_iteration_max_eig(apply_a, v0, inner=None, tol=1e-8,
                            max_iter=50000):
    """Largest eigenvalue of a self-adjoint positive semi-definite operator.

    ``inner`` is the (semi-)inner product in which the operator is
    self-adjoint; it defaults to the Euclidean dot product.  Returns the
    Rayleigh quotient once its relative change per iteration stagnates
    below ``tol``.
    """
    if inner is None:
        inner = lambda a, b: float(a @ b)
    x = np.asarray(v0, dtype=float).copy()
    norm = float(np.linalg.norm(x))
    if norm == 0.0:
        raise ValueError("start vector must be nonzero")
    x /= norm
    lam = None
    for _ in range(max_iter):
        y = apply_a(x)
        ny = float(np.linalg.norm(y))
        if ny == 0.0:
            return 0.0
        denom = inner(x, x)
        if denom <= 0.0:
            # Start vector lies in the null space of the inner product;
            # one more operator application moves it out or ends at 0.
            x = y / ny
            continue
        lam_new = inner(y, x) / denom
        x = y / ny
        if lam is not None and abs(lam_new - lam) <= tol * max(abs(lam_new),
                                                               1e-300):
            return lam_new
        lam = lam_new
    raise IterationError(
        f"power iteration did not stagnate within {max_iter} iterations",
        residual=lam)
