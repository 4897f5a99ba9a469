"""Compiled inner loops.

Both kernels read fair bits straight out of 64-bit words, least significant
bit first, which is the same order :meth:`RandomSource.fair_bits` uses.  They
keep their running state in a small int64 array so a long walk can be fed
through them chunk by chunk.
"""
import numba
import numpy as np

# Layout of the reflected-walk state vector.
S, T, CUR_START, CUR_MAX, CUR_VISITS, PATH_MAX, ZEROS = range(7)
REFLECTED_STATE_SIZE = 7

# Layout of the spider-walk state vector.
SP_T, SP_LEG, SP_RADIUS, SP_BITPOS, SP_LEGPOS = range(5)
SPIDER_STATE_SIZE = 5


def new_reflected_state():
    return np.zeros(REFLECTED_STATE_SIZE, dtype=np.int64)


def new_spider_state():
    return np.zeros(SPIDER_STATE_SIZE, dtype=np.int64)


@numba.njit(cache=True, nogil=True)
def excursion_chunk(words, nsteps, level, state, out_start, out_len, out_max, out_visits):
    """Advance the signed walk ``nsteps`` steps; emit every excursion that closes.

    For each completed excursion (a return of ``|S|`` to 0) the start time,
    length, maximum height and number of visits to ``level`` are written to
    the output arrays.  Returns the number of excursions emitted.
    """
    s = state[S]
    t = state[T]
    cur_start = state[CUR_START]
    cur_max = state[CUR_MAX]
    cur_vis = state[CUR_VISITS]
    path_max = state[PATH_MAX]
    zeros = state[ZEROS]
    one = np.uint64(1)
    count = 0
    for i in range(nsteps):
        bit = (words[i >> 6] >> np.uint64(i & 63)) & one
        if bit:
            s += 1
        else:
            s -= 1
        t += 1
        a = s if s >= 0 else -s
        if a == 0:
            out_start[count] = cur_start
            out_len[count] = t - cur_start
            out_max[count] = cur_max
            out_visits[count] = cur_vis
            count += 1
            zeros += 1
            cur_start = t
            cur_max = 0
            cur_vis = 0
        else:
            if a > cur_max:
                cur_max = a
                if a > path_max:
                    path_max = a
            if a == level:
                cur_vis += 1
    state[S] = s
    state[T] = t
    state[CUR_START] = cur_start
    state[CUR_MAX] = cur_max
    state[CUR_VISITS] = cur_vis
    state[PATH_MAX] = path_max
    state[ZEROS] = zeros
    return count


@numba.njit(cache=True, nogil=True)
def spider_chunk(words, legs, n, level, state, leg_max, level_visits):
    """Step the spider kernel until time ``n`` or until ``legs`` runs out.

    ``legs`` holds 0-based uniform leg draws, one consumed per departure from
    the body; elsewhere one bit is consumed per step.  Returns the time
    reached; the caller refills ``legs`` and calls again if it is below ``n``.
    """
    t = state[SP_T]
    leg = state[SP_LEG]
    r = state[SP_RADIUS]
    bitpos = state[SP_BITPOS]
    legpos = state[SP_LEGPOS]
    one = np.uint64(1)
    nlegs = legs.shape[0]
    while t < n:
        if r == 0:
            if legpos >= nlegs:
                break
            leg = legs[legpos] + 1
            legpos += 1
            r = 1
        else:
            bit = (words[bitpos >> 6] >> np.uint64(bitpos & 63)) & one
            bitpos += 1
            if bit:
                r += 1
            else:
                r -= 1
                if r == 0:
                    leg = 0
        t += 1
        if r > 0:
            if r > leg_max[leg - 1]:
                leg_max[leg - 1] = r
            if r == level:
                level_visits[leg - 1] += 1
    state[SP_T] = t
    state[SP_LEG] = leg
    state[SP_RADIUS] = r
    state[SP_BITPOS] = bitpos
    state[SP_LEGPOS] = legpos
    return t
