"""Triangulated fundamental octagon with side-pairing identifications.

All mesh data lives in one fundamental-domain chart (a triangulated copy of
the regular octagon on the hyperboloid); equivariance is imposed through
vertex classes: every chart vertex i carries a lift word w_i with
position(i) = sigma(w_i) . position(representative).  The flat connection is
literal matrix transport: a discrete ad-valued 1-form has one value per chart
edge, and crossing the paired boundary conjugates by the pairing word's image
(in whichever representation the form is equivariant for).

Per-triangle areas are exact (hyperbolic angle defect), so the total is 4 pi
at every level; the first-order chord areas are kept alongside for
convergence diagnostics.  Edge data (Maurer-Cartan form, solver currents) are
first-order midpoint discretizations.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import lorentz
from .fuchsian import SurfaceGroupRep, Word, as_word, octagon_model, octagon_representation
from .lorentz import cross, log_map, mink_cross_vec, mink_dot

MATCH_TOL = 1e-9
PAIRING_TOL = 1e-10


class MeshError(ValueError):
    """Raised on pairing mismatches or malformed mesh data."""


def _midpoint(X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """Exact geodesic midpoint: the normalized Euclidean average."""
    return lorentz.normalize_to_hyperboloid(0.5 * (X + Y))


def _triangle_angles(X1, X2, X3):
    out = []
    for A, B, C in ((X1, X2, X3), (X2, X3, X1), (X3, X1, X2)):
        u, v = log_map(A, B), log_map(A, C)
        cu = mink_dot(u, v) / np.sqrt(mink_dot(u, u) * mink_dot(v, v))
        out.append(float(np.arccos(np.clip(cu, -1.0, 1.0))))
    return out


@dataclass
class FundamentalMesh:
    rep: SurfaceGroupRep
    level: int
    vertices: np.ndarray          # (nv, 3) chart positions on the hyperboloid
    triangles: np.ndarray         # (nt, 3) positively oriented corner indices
    vertex_class: np.ndarray      # (nv,) class ids
    vertex_lift: list             # (nv,) Words: pos_i = sigma(w_i) pos_rep(class)
    class_rep_vertex: np.ndarray  # (nc,) chart index of each class representative
    side_chains: list             # 8 ordered vertex-index chains along the sides
    boundary_pairs: list          # (u, v, k): sigma(x_k) pos_u = pos_v
    pairing_words: tuple          # 8 Words (x_k in the generators)
    areas: np.ndarray             # (nt,) exact angle-defect areas
    chord_areas: np.ndarray       # (nt,) embedded flat areas (first order)
    edges: np.ndarray             # (ne, 2) sorted vertex pairs
    edge_index: dict              # (i, j) i<j -> edge id
    tri_coords: np.ndarray        # (nt, 3, 2) corner coordinates in the domain chart
    tri_dxinv: np.ndarray         # (nt, 2, 2) inverse of the edge-coordinate matrix
    circumcenters: np.ndarray     # (nt, 3)
    frames: np.ndarray            # (nt, 2, 3) orthonormal oriented frame at the circumcenter
    min_angle: float
    path_cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def n_classes(self) -> int:
        return len(self.class_rep_vertex)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    def lift_matrices(self, rep: SurfaceGroupRep) -> np.ndarray:
        """(nv, 3, 3) images of the vertex lift words under `rep`."""
        cache = {}
        out = np.empty((self.n_vertices, 3, 3))
        for i, w in enumerate(self.vertex_lift):
            key = w.letters
            if key not in cache:
                cache[key] = rep.evaluate(w)
            out[i] = cache[key]
        return out

    def boundary_vertex_set(self) -> set:
        out = set()
        for ch in self.side_chains:
            out.update(ch)
        return out

    def validate(self, tol: float = PAIRING_TOL):
        for u, v, k in self.boundary_pairs:
            g = self.rep.evaluate(self.pairing_words[k])
            if float(np.abs(g @ self.vertices[u] - self.vertices[v]).max()) > tol:
                raise MeshError("paired boundary vertices do not match under the pairing isometry")
        for i, w in enumerate(self.vertex_lift):
            root = self.class_rep_vertex[self.vertex_class[i]]
            drift = np.abs(
                self.rep.evaluate(w) @ self.vertices[root] - self.vertices[i]
            ).max()
            if drift > tol:
                raise MeshError("vertex lift word does not reproduce the chart position")
        dets = np.linalg.det(self.vertices[self.triangles].transpose(0, 2, 1))
        if not (dets > 0).all():
            raise MeshError("negatively oriented triangle")
        return self

    def to_json(self) -> dict:
        return {
            "level": self.level,
            "vertices": self.vertices.tolist(),
            "triangles": self.triangles.tolist(),
            "pairings": [
                {"side": k, "word": str(w), "matrix": self.rep.evaluate(w).tolist()}
                for k, w in enumerate(self.pairing_words)
            ],
        }


# ---------------------------------------------------------------------------
# construction
# ---------------------------------------------------------------------------

class _UnionFind:
    """Union-find whose edges carry words: pos(i) = sigma(word_i) pos(root)."""

    def __init__(self, n):
        self.parent = list(range(n))
        self.word = [Word() for _ in range(n)]

    def find(self, i):
        if self.parent[i] == i:
            return i, self.word[i]
        root, w = self.find(self.parent[i])
        self.parent[i] = root
        self.word[i] = self.word[i] * w
        return root, self.word[i]

    def union(self, i, j, w_ij):
        """Declare pos(i) = sigma(w_ij) pos(j)."""
        ri, wi = self.find(i)
        rj, wj = self.find(j)
        if ri == rj:
            return
        # pos(ri) = sigma(wi^-1 w_ij wj) pos(rj)
        self.parent[ri] = rj
        self.word[ri] = wi.inverse() * w_ij * wj


def build_octagon_mesh(rep: SurfaceGroupRep, level: int) -> FundamentalMesh:
    """Fan-triangulated regular octagon, `level` rounds of 1:4 subdivision.

    rep must be the octagon representation (the mesh geometry belongs to it);
    a PairingError-grade mismatch raises MeshError.
    """
    base = octagon_representation()
    if float(np.abs(rep.generators - base.generators).max()) > 1e-8:
        raise MeshError("mesh construction requires the octagon representation")
    model = octagon_model()

    verts = [np.array([0.0, 0.0, 1.0])] + [model.vertices[j] for j in range(8)]
    corners = list(range(1, 9))
    tris = [(0, corners[(j - 1) % 8], corners[j]) for j in range(8)]
    chains = [[corners[(j - 1) % 8], corners[j]] for j in range(8)]

    for _ in range(level):
        mid = {}

        def midpoint_index(i, j):
            key = (min(i, j), max(i, j))
            if key not in mid:
                verts.append(_midpoint(verts[i], verts[j]))
                mid[key] = len(verts) - 1
            return mid[key]

        new_tris = []
        for (i, j, k) in tris:
            a, b, c = midpoint_index(i, j), midpoint_index(j, k), midpoint_index(k, i)
            new_tris.extend([(i, a, c), (a, j, b), (c, b, k), (a, b, c)])
        tris = new_tris
        chains = [
            [x for pair in zip(ch, ch[1:]) for x in (pair[0], midpoint_index(*pair))] + [ch[-1]]
            for ch in chains
        ]

    vertices = np.array(verts)
    triangles = np.array(tris, dtype=int)

    # twin matching along paired sides: x_k maps side k+4 onto side k
    uf = _UnionFind(len(verts))
    boundary_pairs = []
    for k in range(4):
        g = model.pairing_mats[k]
        w_inv = model.pairing_words[(k + 4) % 8]  # word of x_k^-1
        targets = {u: vertices[u] for u in chains[k]}
        for u in chains[(k + 4) % 8]:
            img = g @ vertices[u]
            match = None
            for v, pos in targets.items():
                if np.abs(img - pos).max() <= MATCH_TOL:
                    match = v
                    break
            if match is None:
                raise MeshError(f"no twin on side {k} for boundary vertex {u}")
            boundary_pairs.append((u, match, k))
            uf.union(u, match, w_inv)  # pos(u) = sigma(x_k^-1) pos(match)

    roots = {}
    vertex_class = np.empty(len(verts), dtype=int)
    vertex_lift = [None] * len(verts)
    for i in range(len(verts)):
        root, w = uf.find(i)
        if root not in roots:
            roots[root] = len(roots)
        vertex_class[i] = roots[root]
        vertex_lift[i] = w
    class_rep_vertex = np.empty(len(roots), dtype=int)
    for root, cid in roots.items():
        class_rep_vertex[cid] = root

    # geometry caches
    nt = len(triangles)
    areas = np.empty(nt)
    chord_areas = np.empty(nt)
    circum = np.empty((nt, 3))
    frames = np.empty((nt, 2, 3))
    tri_coords = np.empty((nt, 3, 2))
    tri_dxinv = np.empty((nt, 2, 2))
    min_angle = np.inf
    for t, (i, j, k) in enumerate(triangles):
        X1, X2, X3 = vertices[i], vertices[j], vertices[k]
        ang = _triangle_angles(X1, X2, X3)
        min_angle = min(min_angle, *ang)
        areas[t] = np.pi - sum(ang)
        u, w = X2 - X1, X3 - X1
        G = np.array([[mink_dot(u, u), mink_dot(u, w)], [mink_dot(w, u), mink_dot(w, w)]])
        chord_areas[t] = 0.5 * np.sqrt(max(np.linalg.det(G), 0.0))
        C = _circumcenter(X1, X2, X3)
        circum[t] = C
        E1 = log_map(C, X1)
        E1 = E1 / np.sqrt(mink_dot(E1, E1))
        E2 = mink_cross_vec(C, E1)  # +90 degrees: (E1, E2) positively oriented
        frames[t] = [E1, E2]
        for c, X in enumerate((X1, X2, X3)):
            v = log_map(C, X)
            tri_coords[t, c] = [mink_dot(v, E1), mink_dot(v, E2)]
        D = np.column_stack([tri_coords[t, 1] - tri_coords[t, 0], tri_coords[t, 2] - tri_coords[t, 0]])
        if np.linalg.det(D) <= 0:
            raise MeshError("triangle chart coordinates are not positively oriented")
        tri_dxinv[t] = np.linalg.inv(D)

    edge_index = {}
    for (i, j, k) in triangles:
        for a, b in ((i, j), (j, k), (k, i)):
            key = (min(a, b), max(a, b))
            if key not in edge_index:
                edge_index[key] = len(edge_index)
    edges = np.array(sorted(edge_index, key=edge_index.get), dtype=int)

    mesh = FundamentalMesh(
        rep=base,
        level=level,
        vertices=vertices,
        triangles=triangles,
        vertex_class=vertex_class,
        vertex_lift=vertex_lift,
        class_rep_vertex=class_rep_vertex,
        side_chains=chains,
        boundary_pairs=boundary_pairs,
        pairing_words=model.pairing_words,
        areas=areas,
        chord_areas=chord_areas,
        edges=edges,
        edge_index=edge_index,
        tri_coords=tri_coords,
        tri_dxinv=tri_dxinv,
        circumcenters=circum,
        frames=frames,
        min_angle=float(np.degrees(min_angle)),
    )
    return mesh.validate()


def _circumcenter(X1, X2, X3):
    """Hyperbolic circumcenter: the timelike direction orthogonal to the
    chordal edge vectors; falls back to the normalized barycenter for
    obtuse/degenerate data."""
    w = mink_cross_vec(X2 - X1, X3 - X1)
    q = mink_dot(w, w)
    if q < 0:
        return lorentz.normalize_to_hyperboloid(w)
    return lorentz.normalize_to_hyperboloid((X1 + X2 + X3) / 3.0)


# ---------------------------------------------------------------------------
# discrete 1-forms
# ---------------------------------------------------------------------------

@dataclass
class DiscreteOneForm:
    """One value per directed chart edge, antisymmetric under reversal.

    kind: "lie" for so(2,1)-valued (3,3) entries, "vec" for R^{2,1} values.
    Stored on the canonical orientation (i < j).
    """

    mesh: FundamentalMesh
    values: np.ndarray  # (ne, 3, 3) or (ne, 3)
    kind: str = "lie"

    def value(self, i: int, j: int) -> np.ndarray:
        key = (min(i, j), max(i, j))
        v = self.values[self.mesh.edge_index[key]]
        return v if i < j else -v

    def __add__(self, other):
        return DiscreteOneForm(self.mesh, self.values + other.values, self.kind)

    def __sub__(self, other):
        return DiscreteOneForm(self.mesh, self.values - other.values, self.kind)

    def __mul__(self, c: float):
        return DiscreteOneForm(self.mesh, c * self.values, self.kind)

    __rmul__ = __mul__


def form_from_edge_function(mesh: FundamentalMesh, fn, kind: str = "lie") -> DiscreteOneForm:
    """Build a form from fn(i, j) evaluated on canonical edge orientations."""
    shape = (len(mesh.edges), 3, 3) if kind == "lie" else (len(mesh.edges), 3)
    values = np.empty(shape)
    for e, (i, j) in enumerate(mesh.edges):
        values[e] = fn(int(i), int(j))
    return DiscreteOneForm(mesh, values, kind)


def maurer_cartan(mesh: FundamentalMesh) -> DiscreteOneForm:
    """First-order discrete dx cross x: edge value (head - tail) x midpoint."""
    def fn(i, j):
        m = _midpoint(mesh.vertices[i], mesh.vertices[j])
        return cross(mesh.vertices[j] - mesh.vertices[i], m)

    return form_from_edge_function(mesh, fn, kind="lie")


def closedness_residual(form: DiscreteOneForm) -> float:
    """Max over triangle loops of |sum of edge values| / local mass.

    In the chart the flat connection is trivial, so interior loops need no
    transport; the normalization by the local 1-form mass makes the residual
    O(h^2) for midpoint-sampled gradients, O(h) for the solver currents and
    O(1) for random data, with 0/0 treated as 0.
    """
    mesh = form.mesh
    worst = 0.0
    for (i, j, k) in mesh.triangles:
        loop = form.value(i, j) + form.value(j, k) + form.value(k, i)
        m = (
            np.linalg.norm(form.value(i, j))
            + np.linalg.norm(form.value(j, k))
            + np.linalg.norm(form.value(k, i))
        )
        if m > 0:
            worst = max(worst, float(np.linalg.norm(loop)) / m)
    return worst


def wedge_pair(phi: DiscreteOneForm, psi: DiscreteOneForm) -> float:
    """Discrete symplectic pairing (1/2) int phi wedge psi with Killing contraction."""
    if phi.mesh is not psi.mesh:
        raise MeshError("wedge_pair requires forms on the same mesh")
    total = 0.0
    for (i, j, k) in phi.mesh.triangles:
        total += _triangle_wedge(phi, psi, i, j, k)
    return 0.5 * total


def _triangle_wedge(phi, psi, i, j, k) -> float:
    """Whitney-form wedge of two edge cochains on one oriented triangle."""
    def K(A, B):
        return float(np.tensordot(A, B.T, axes=2))

    p01, p12, p20 = phi.value(i, j), phi.value(j, k), phi.value(k, i)
    q01, q12, q20 = psi.value(i, j), psi.value(j, k), psi.value(k, i)
    return (
        K(p01, q12 - q20) + K(p12, q20 - q01) + K(p20, q01 - q12)
    ) / 6.0


def triangle_wedge_density(phi: DiscreteOneForm, psi: DiscreteOneForm) -> np.ndarray:
    """Per-triangle *(phi wedge psi): the wedge integral divided by exact area."""
    mesh = phi.mesh
    out = np.empty(mesh.n_triangles)
    for t, (i, j, k) in enumerate(mesh.triangles):
        out[t] = _triangle_wedge(phi, psi, i, j, k) / mesh.areas[t]
    return out


# ---------------------------------------------------------------------------
# loop integrals / cocycle extraction
# ---------------------------------------------------------------------------

def _bfs_path(mesh: FundamentalMesh, start: int, goal: int) -> list:
    """Vertex path along chart edges from start to goal (cached per mesh)."""
    if start == goal:
        return [start]
    if (start, goal) in mesh.path_cache:
        return mesh.path_cache[(start, goal)]
    if "adj" not in mesh.path_cache:
        adj = {}
        for i, j in mesh.edges:
            adj.setdefault(int(i), []).append(int(j))
            adj.setdefault(int(j), []).append(int(i))
        mesh.path_cache["adj"] = adj
    adj = mesh.path_cache["adj"]
    prev = {start: None}
    queue = [start]
    while queue:
        nxt = []
        for u in queue:
            for v in adj[u]:
                if v not in prev:
                    prev[v] = u
                    if v == goal:
                        path = [v]
                        while prev[path[-1]] is not None:
                            path.append(prev[path[-1]])
                        mesh.path_cache[(start, goal)] = path[::-1]
                        return mesh.path_cache[(start, goal)]
                    nxt.append(v)
        queue = nxt
    raise MeshError("mesh is not edge-connected")


def _path_sum(form: DiscreteOneForm, path: list) -> np.ndarray:
    total = np.zeros_like(form.values[0])
    for a, b in zip(path, path[1:]):
        total = total + form.value(a, b)
    return total


def loop_integral(
    form: DiscreteOneForm,
    word,
    rep: SurfaceGroupRep | None = None,
    base_vertex: int = 0,
) -> np.ndarray:
    """alpha(word): transported primitive increments along a lattice loop.

    rep is the representation whose Ad transports the form across the
    boundary (mesh.rep for sigma-equivariant data like the Maurer-Cartan
    form, the solver's target rep for V_q).  For each octagon pairing x_k,
    I(x_k) = P(base -> y) + Ad(rep(x_k)) P(y' -> base), with y on side k and
    y' its twin on side k+4; letters compose by the cocycle rule, so the
    result satisfies it up to the discretization error of the form.
    """
    mesh = form.mesh
    rep = rep if rep is not None else mesh.rep
    word = as_word(word)

    # per-pairing single-crossing integrals
    incr = {}
    mats = {}
    twin_of = {}
    for u, v, k in mesh.boundary_pairs:
        twin_of.setdefault(k, {})[v] = u  # y on side k -> y' on side k+4
    for k in range(4):
        chain = mesh.side_chains[k]
        y = chain[len(chain) // 2]
        yp = twin_of[k][y]
        g = rep.evaluate(mesh.pairing_words[k])
        P1 = _path_sum(form, _bfs_path(mesh, base_vertex, y))
        P2 = _path_sum(form, _bfs_path(mesh, yp, base_vertex))
        incr[k] = P1 + g @ P2 @ lorentz.group_inv(g)
        mats[k] = g
        incr[k + 4] = -(lorentz.group_inv(g) @ incr[k] @ g)
        mats[k + 4] = lorentz.group_inv(g)

    # expand the generator word into pairing letters
    from .fuchsian import _GENERATOR_X_WORDS

    letters = []
    for n, e in word.letters:
        xw = _GENERATOR_X_WORDS[n]
        if e > 0:
            letters.extend(xw)
        else:
            letters.extend((k + 4) % 8 for k in reversed(xw))

    total = np.zeros_like(form.values[0])
    prefix = np.eye(3)
    for k in letters:
        total = total + prefix @ incr[k] @ lorentz.group_inv(prefix)
        prefix = prefix @ mats[k]
    return total


def extract_cocycle(form: DiscreteOneForm, rep: SurfaceGroupRep | None = None, base_vertex: int = 0):
    """Cocycle from generator loop integrals (deferred import avoids a cycle)."""
    from .cocycle import Cocycle
    from .fuchsian import GENERATOR_NAMES

    rep = rep if rep is not None else form.mesh.rep
    vals = np.array([loop_integral(form, n, rep, base_vertex) for n in GENERATOR_NAMES])
    return Cocycle(rep, vals)


def mesh_to_json_file(mesh: FundamentalMesh, path):
    with open(path, "w") as fh:
        json.dump(mesh.to_json(), fh)
