"""Pure-Python hot kernels.

Arithmetic mirrors ``_ckernels.pyx`` operation for operation so both backends
produce the same floating-point results on the same platform libm.

State layout (shared with the compiled backend)
-----------------------------------------------
istate (int64): slot, remaining, dof, round_pos, round_ni, round_ok,
                transmissions, erasures, silent, status
fstate (float64): log_gain, energy
fpar (float64): m, sigma, a1, innov_std, log_snr, bits, pt, pt_max, h_out,
                pe_adaptive, tp, tail, const_pe
ipar (int64): scheme, policy, erasure_mode, block, orientation, slot_cap
"""

import math

import numpy as np

SQRT2 = 1.4142135623730951

# istate slots
I_SLOT, I_REMAINING, I_DOF, I_RPOS, I_RNI, I_ROK, I_TX, I_ERASED, I_SILENT, I_STATUS = range(10)
# fstate slots
F_X, F_ENERGY = range(2)

STATUS_RUNNING, STATUS_DONE, STATUS_CAPPED = 0, 1, 2

BACKEND = "python"


def ar1_log(z, m, sigma, a1, innov_std):
    """Stationary Gaussian AR(1) path driven by standard normals ``z``."""
    n = len(z)
    out = np.empty(n, dtype=np.float64)
    if n == 0:
        return out
    c0 = m * (1.0 - a1)
    x = m + sigma * float(z[0])
    out[0] = x
    zl = z.tolist()
    for k in range(1, n):
        x = c0 + a1 * x + innov_std * zl[k]
        out[k] = x
    return out


def run_block(z, u, istate, fstate, fpar, ipar, sched, profile):
    """Advance one episode over pre-drawn variates; return variates consumed.

    Stops early when the episode completes or hits the slot cap; ``istate``
    and ``fstate`` are updated in place.
    """
    m, sigma, a1, s, log_snr, bits, pt, pt_max, h_out, pe_adapt, tp, tail, const_pe = (
        float(v) for v in fpar
    )
    scheme, policy, mode, block, orient, cap = (int(v) for v in ipar)
    sched = sched.tolist()
    prof = profile.tolist()
    nprof = len(prof)
    c0 = m * (1.0 - a1)

    slot, remaining, dof, rpos, rni, rok, tx, erased, silent, status = (int(v) for v in istate)
    x = float(fstate[F_X])
    energy = float(fstate[F_ENERGY])

    zl = z.tolist()
    ul = u.tolist()
    n = len(zl)
    used = 0
    for k in range(n):
        if slot >= cap:
            status = STATUS_CAPPED
            break
        if scheme == 1 and rpos == rni:
            # acknowledgment slot: no transmission, channel still advances
            dof -= rok if rok < dof else dof
            if dof == 0:
                remaining -= block if block < remaining else remaining
                if remaining == 0:
                    status = STATUS_DONE
                else:
                    dof = block if block < remaining else remaining
            if status == STATUS_RUNNING:
                rni = sched[dof]
            rpos = 0
            rok = 0
        else:
            ok = False
            if policy == 1:
                power = pt * h_out / math.exp(x)
                active = power <= pt_max
            else:
                power = pt
                active = True
            if active:
                if mode == 1:
                    pe = const_pe
                elif mode == 2:
                    pe = prof[slot] if slot < nprof else tail
                elif policy == 1:
                    pe = pe_adapt
                else:
                    if orient == 0:
                        arg = (m - (x - log_snr)) / sigma
                    else:
                        arg = (m - (x + log_snr)) / sigma
                    pb = 0.5 * math.erfc(arg / SQRT2)
                    pe = 1.0 if pb >= 1.0 else -math.expm1(bits * math.log1p(-pb))
                tx += 1
                energy += power * tp
                if ul[k] < pe:
                    erased += 1
                else:
                    ok = True
            else:
                silent += 1
            if scheme == 0:
                if ok:
                    remaining -= 1
                    if remaining == 0:
                        status = STATUS_DONE
            else:
                if ok:
                    rok += 1
                rpos += 1
        slot += 1
        x = c0 + a1 * x + s * zl[k]
        used = k + 1
        if status != STATUS_RUNNING:
            break

    istate[:] = (slot, remaining, dof, rpos, rni, rok, tx, erased, silent, status)
    fstate[F_X] = x
    fstate[F_ENERGY] = energy
    return used
