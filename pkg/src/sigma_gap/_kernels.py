"""Compiled statevector kernels.

Gates are encoded as parallel integer arrays ``kinds, q0, q1, slots`` with
kind 0 = RY, 1 = CZ, 2 = CNOT (``q0`` control, ``q1`` target). Qubit 0 is
the most significant bit of an amplitude index.
"""

from __future__ import annotations

import math

import numba
import numpy as np

RY, CZ, CNOT = 0, 1, 2


@numba.njit(cache=True)
def _ry(psi, n, q, c, s):
    stride = 1 << (n - q - 1)
    for a in range(1 << q):
        base = a * 2 * stride
        for b in range(stride):
            i0 = base + b
            i1 = i0 + stride
            x = psi[i0]
            y = psi[i1]
            psi[i0] = c * x - s * y
            psi[i1] = s * x + c * y


@numba.njit(cache=True)
def _ry_derivative(psi, out, n, q, c, s):
    # d/dtheta of [[c, -s], [s, c]] with c = cos(theta/2), s = sin(theta/2)
    stride = 1 << (n - q - 1)
    for a in range(1 << q):
        base = a * 2 * stride
        for b in range(stride):
            i0 = base + b
            i1 = i0 + stride
            x = psi[i0]
            y = psi[i1]
            out[i0] = 0.5 * (-s * x - c * y)
            out[i1] = 0.5 * (c * x - s * y)


@numba.njit(cache=True)
def _cz(psi, n, a, b):
    ma = 1 << (n - 1 - a)
    mb = 1 << (n - 1 - b)
    both = ma | mb
    for i in range(psi.size):
        if i & both == both:
            psi[i] = -psi[i]


@numba.njit(cache=True)
def _cnot(psi, n, control, target):
    mc = 1 << (n - 1 - control)
    mt = 1 << (n - 1 - target)
    for i in range(psi.size):
        if i & mc and not i & mt:
            j = i | mt
            tmp = psi[i]
            psi[i] = psi[j]
            psi[j] = tmp


@numba.njit(cache=True)
def _gate(psi, n, kind, a, b, theta):
    if kind == 0:
        _ry(psi, n, a, math.cos(0.5 * theta), math.sin(0.5 * theta))
    elif kind == 1:
        _cz(psi, n, a, b)
    else:
        _cnot(psi, n, a, b)


@numba.njit(cache=True)
def run_circuit(psi, n, kinds, q0, q1, slots, params):
    """Apply all gates in order to ``psi`` in place."""
    for g in range(kinds.size):
        theta = params[slots[g]] if kinds[g] == 0 else 0.0
        _gate(psi, n, kinds[g], q0[g], q1[g], theta)


@numba.njit(cache=True)
def _csr_matvec(indptr, indices, data, x, out):
    for row in range(indptr.size - 1):
        acc = 0.0 * x[0]
        for k in range(indptr[row], indptr[row + 1]):
            acc += data[k] * x[indices[k]]
        out[row] = acc


@numba.njit(cache=True)
def adjoint_gradient(psi, lam, n, kinds, q0, q1, slots, params, indptr, indices, data, grad):
    """Forward pass into ``psi``, then reverse sweep filling ``grad``; returns the energy.

    ``psi`` holds the initial state on entry; ``lam`` is scratch of the same size.
    """
    run_circuit(psi, n, kinds, q0, q1, slots, params)
    _csr_matvec(indptr, indices, data, psi, lam)
    energy = 0.0
    for i in range(psi.size):
        energy += (np.conj(psi[i]) * lam[i]).real
    work = np.empty_like(psi)
    for g in range(kinds.size - 1, -1, -1):
        kind = kinds[g]
        theta = -params[slots[g]] if kind == 0 else 0.0
        _gate(psi, n, kind, q0[g], q1[g], theta)
        if kind == 0:
            t = params[slots[g]]
            _ry_derivative(psi, work, n, q0[g], math.cos(0.5 * t), math.sin(0.5 * t))
            acc = 0.0
            for i in range(psi.size):
                acc += (np.conj(lam[i]) * work[i]).real
            grad[slots[g]] = 2.0 * acc
        _gate(lam, n, kind, q0[g], q1[g], theta)
    return energy
