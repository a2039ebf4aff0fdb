"""Compiled core of the network simulator.

Virtual cut-through switching is modelled at packet granularity with flit
timing: a packet holds a link (or a crossbar lane) for ``F`` cycles, the
head may leave a buffer one cycle after it arrived, and buffer space is
reserved for whole packets.  Every stage moves at most one flit per cycle,
so head timestamps determine the tail timestamps as well.

Ports are numbered globally: switch ``c`` owns ``port_base[c] ..
port_base[c+1]-1``, the first ``deg[c]`` of them toward other switches and
the rest toward its endpoints.  A port is bidirectional: its input side
holds the input buffers, its output side the output buffers and the link.
"""

import numba as nb
import numpy as np

EV_ARRIVE = 0
EV_HEAD = 1
EV_CREDIT = 2
EV_INJ_CREDIT = 3
EV_OB_FREE = 4
EV_DELIVER = 5

ST_OK = 0
ST_DEADLOCK = 1
ST_CREDIT = 2
ST_CORNER = 3
ST_HOPS = 4
ST_LOSS = 5
ST_OVERFLOW = 6

R_POLARIZED = 0
R_MIN = 1
R_KSP = 2

P_UNIFORM = 0
P_PERM = 1
P_SWITCH_PERM = 2
P_BIPARTITE = 3
P_ALL2ALL = 4

NEVER = np.int64(1) << np.int64(62)
_MULT = np.uint64(0x2545F4914F6CDD1D)
_INV53 = 1.0 / 9007199254740992.0


@nb.njit(cache=True, inline="always")
def _rand(state, i):
    x = state[i]
    x ^= x >> np.uint64(12)
    x ^= x << np.uint64(25)
    x ^= x >> np.uint64(27)
    state[i] = x
    return x * _MULT


@nb.njit(cache=True, inline="always")
def _uniform(state, i):
    return np.float64(_rand(state, i) >> np.uint64(11)) * _INV53


@nb.njit(cache=True, inline="always")
def _randint(state, i, n):
    return np.int64((_rand(state, i) >> np.uint64(11)) % np.uint64(n))


@nb.njit(cache=True, inline="always")
def _push(wheel, wheel_n, t, kind, a, b):
    W = wheel.shape[0]
    slot = t % W
    k = wheel_n[slot]
    if k >= wheel.shape[1]:
        return False
    wheel[slot, k, 0] = kind
    wheel[slot, k, 1] = a
    wheel[slot, k, 2] = b
    wheel_n[slot] = k + 1
    return True


@nb.njit(cache=True)
def _draw_message(e, t_prev, first, gen_p, p_mice, big, pattern, n_ep, ep_switch,
                  ep_rng, perm, leaf_perm, leaf_row, leaf_ep_off, leaf_eps,
                  half_of_leaf, half_off, half_eps, out):
    """Next message of endpoint ``e``: (time, destination, packets, class)."""
    if gen_p <= 0.0:
        out[0] = NEVER
        return
    if gen_p >= 1.0:
        gap = 1
    else:
        u = _uniform(ep_rng, e)
        gap = 1 + np.int64(np.floor(np.log1p(-u) / np.log1p(-gen_p)))
    out[0] = t_prev + gap - (1 if first else 0)
    size, cls = 1, 0
    if p_mice < 1.0:
        if _uniform(ep_rng, e) >= p_mice:
            size, cls = big, 1
    out[2] = size
    out[3] = cls
    if pattern == P_UNIFORM:
        d = _randint(ep_rng, e, n_ep - 1)
        if d >= e:
            d += 1
    elif pattern == P_PERM:
        d = perm[e]
    elif pattern == P_SWITCH_PERM:
        lr = leaf_perm[leaf_row[ep_switch[e]]]
        lo = leaf_ep_off[lr]
        d = leaf_eps[lo + _randint(ep_rng, e, leaf_ep_off[lr + 1] - lo)]
    else:
        h = 1 - half_of_leaf[leaf_row[ep_switch[e]]]
        lo = half_off[h]
        d = half_eps[lo + _randint(ep_rng, e, half_off[h + 1] - lo)]
    out[1] = d


@nb.njit(cache=True, inline="always")
def _occupancy(gp, V, IB, F, req_cnt, ob_used, credit, is_inter):
    occ = req_cnt[gp]
    for v in range(V):
        occ += ob_used[gp, v]
        if is_inter:
            occ += IB - credit[gp, v]
    return occ * F


@nb.njit(cache=True)
def simulate(
    # topology
    deg, nbr, port_base, port_peer, port_ep, port_switch, leaf_row, dist,
    ep_switch, ep_gp,
    # routing
    routing, penalty, path_off, path_nodes, pair_off, ksp_reselect,
    # traffic
    pattern, gen_p, p_mice, big, perm, leaf_perm, leaf_ep_off, leaf_eps,
    half_of_leaf, half_off, half_eps, a2a_tasks, a2a_packets,
    # switch
    F, IB, OB, V, SP, router_delay, link_lat,
    # run control
    seed_states, alloc_state, warmup, measure_end, max_cycles, drain,
    stall_window, check_every, trace_len,
    # outputs
    counters, lat_hist, hop_hist, link_flits, trace,
):
    """Run the network; returns a status code.  ``counters`` receives:
    0 cycles run, 1 injected packets, 2 delivered packets, 3 delivered
    flits in window, 4 generated flits in window, 5 completion cycle,
    6 messages delivered, 7 stall cycle, 8 in flight at exit,
    9 fault detail a, 10 fault detail b, 11 fault detail c, 12 checks run,
    13 mice flits generated, 14 elephant flits generated,
    15 window messages still outstanding, 16 trace events written."""
    n_sw = deg.shape[0]
    GP = port_peer.shape[0]
    S = ep_switch.shape[0]
    L = dist.shape[0]
    n_ep_active = S if pattern != P_ALL2ALL else a2a_tasks

    # buffers
    ib_fifo = np.zeros((GP, V, IB), dtype=np.int32)
    ib_head = np.zeros((GP, V), dtype=np.int64)
    ib_cnt = np.zeros((GP, V), dtype=np.int64)
    ob_fifo = np.zeros((GP, V, OB), dtype=np.int32)
    ob_head = np.zeros((GP, V), dtype=np.int64)
    ob_cnt = np.zeros((GP, V), dtype=np.int64)
    ob_used = np.zeros((GP, V), dtype=np.int64)
    ob_tot = np.zeros(GP, dtype=np.int64)
    credit = np.full((GP, V), IB, dtype=np.int64)
    out_lane = np.zeros((GP, SP), dtype=np.int64)
    in_lane = np.zeros((GP, SP), dtype=np.int64)
    link_free = np.zeros(GP, dtype=np.int64)
    rr_vc = np.zeros(GP, dtype=np.int64)
    max_ports = 0
    for c in range(n_sw):
        max_ports = max(max_ports, port_base[c + 1] - port_base[c])
    RC = max_ports * V
    req_ig = np.zeros((GP, RC), dtype=np.int64)
    req_v = np.zeros((GP, RC), dtype=np.int64)
    req_ov = np.zeros((GP, RC), dtype=np.int64)
    req_cnt = np.zeros(GP, dtype=np.int64)
    cand_buf = np.zeros(RC, dtype=np.int64)

    # packets and messages
    P = GP * V * (IB + OB) + S * 2 + 16
    pk_src = np.zeros(P, dtype=np.int64)
    pk_dst = np.zeros(P, dtype=np.int64)
    pk_hop = np.zeros(P, dtype=np.int64)
    pk_bal = np.zeros(P, dtype=np.int64)
    pk_msg = np.zeros(P, dtype=np.int64)
    pk_path = np.zeros(P, dtype=np.int64)
    pk_out = np.zeros(P, dtype=np.int64)
    pk_ovc = np.zeros(P, dtype=np.int64)
    pk_ready = np.zeros(P, dtype=np.int64)
    pk_arr = np.zeros(P, dtype=np.int64)
    pk_free = np.arange(P - 1, -1, -1).astype(np.int64)
    pk_top = P
    M = P + S
    msg_left = np.zeros(M, dtype=np.int64)
    msg_gen = np.zeros(M, dtype=np.int64)
    msg_cls = np.zeros(M, dtype=np.int64)
    msg_free = np.arange(M - 1, -1, -1).astype(np.int64)
    msg_top = M

    # endpoints
    ep_rng = seed_states.copy()
    ep_next = np.zeros((S, 4), dtype=np.int64)
    cur_msg = np.full(S, -1, dtype=np.int64)
    cur_left = np.zeros(S, dtype=np.int64)
    cur_dst = np.zeros(S, dtype=np.int64)
    inj_credit = np.full(S, IB, dtype=np.int64)
    inj_free = np.zeros(S, dtype=np.int64)
    a2a_k = np.zeros(S, dtype=np.int64)
    tmp = np.zeros(4, dtype=np.int64)
    for e in range(S):
        if pattern == P_ALL2ALL:
            if e < a2a_tasks and a2a_tasks > 1:
                ep_next[e, 0] = 0
                ep_next[e, 1] = (e + 1) % a2a_tasks
                ep_next[e, 2] = a2a_packets
                ep_next[e, 3] = 0
                a2a_k[e] = 1
            else:
                ep_next[e, 0] = NEVER
        else:
            _draw_message(e, 0, True, gen_p, p_mice, big, pattern, S, ep_switch, ep_rng,
                          perm, leaf_perm, leaf_row, leaf_ep_off, leaf_eps,
                          half_of_leaf, half_off, half_eps, tmp)
            for j in range(4):
                ep_next[e, j] = tmp[j]

    # event wheel
    horizon = F + link_lat + router_delay + 4
    W = 1
    while W < horizon:
        W *= 2
    CAP = 4 * GP * SP + 4 * S + 64
    wheel = np.zeros((W, CAP, 3), dtype=np.int64)
    wheel_n = np.zeros(W, dtype=np.int64)

    injected = 0
    delivered = 0
    last_move = 0
    trace_pos = 0
    outstanding_window = 0
    a2a_remaining = 0
    if pattern == P_ALL2ALL and a2a_tasks > 1:
        a2a_remaining = a2a_tasks * (a2a_tasks - 1)
    status = ST_OK
    T = 0
    end = max_cycles
    while T < end:
        # 1. events due now
        slot = T % W
        n_ev = wheel_n[slot]
        for k in range(n_ev):
            kind = wheel[slot, k, 0]
            a = wheel[slot, k, 1]
            b = wheel[slot, k, 2]
            if trace_len > 0:
                tp = trace_pos % trace_len
                trace[tp, 0] = T
                trace[tp, 1] = kind
                trace[tp, 2] = a
                trace[tp, 3] = b
                trace_pos += 1
            if kind == EV_ARRIVE:
                gp = b // V
                v = b % V
                if ib_cnt[gp, v] >= IB:
                    counters[9] = gp
                    counters[10] = v
                    status = ST_CREDIT
                    break
                pos = (ib_head[gp, v] + ib_cnt[gp, v]) % IB
                ib_fifo[gp, v, pos] = a
                ib_cnt[gp, v] += 1
                pk_arr[a] = T
                if ib_cnt[gp, v] == 1:
                    if not _push(wheel, wheel_n, T + router_delay, EV_HEAD, gp, v):
                        status = ST_OVERFLOW
                        break
            elif kind == EV_HEAD:
                gp = a
                v = b
                pkt = ib_fifo[gp, v, ib_head[gp, v]]
                c = port_switch[gp]
                d = pk_dst[pkt]
                dleaf = ep_switch[d]
                if c == dleaf:
                    out_gp = ep_gp[d]
                    ovc = 0
                else:
                    h = pk_hop[pkt]
                    ovc = h // 2
                    if ovc >= V:
                        counters[9] = pkt
                        counters[10] = h
                        counters[11] = c
                        status = ST_HOPS
                        break
                    base = port_base[c]
                    rt = leaf_row[dleaf]
                    chosen = -1
                    if routing == R_KSP:
                        pid = pk_path[pkt]
                        if ksp_reselect and h == 0:
                            rs = leaf_row[ep_switch[pk_src[pkt]]]
                            lo = pair_off[rs * L + rt]
                            hi = pair_off[rs * L + rt + 1]
                            best = NEVER
                            ties = 0
                            for q in range(lo, hi):
                                nxt = path_nodes[path_off[q] + 1]
                                for p in range(deg[c]):
                                    if nbr[c, p] == nxt:
                                        o = _occupancy(base + p, V, IB, F, req_cnt, ob_used, credit, True)
                                        if o < best:
                                            best = o
                                            pid = q
                                            ties = 1
                                        elif o == best:
                                            ties += 1
                                            if _randint(alloc_state, 0, ties) == 0:
                                                pid = q
                                        break
                            pk_path[pkt] = pid
                        nxt = path_nodes[path_off[pid] + h + 1]
                        for p in range(deg[c]):
                            if nbr[c, p] == nxt:
                                chosen = p
                                break
                    else:
                        rs = leaf_row[ep_switch[pk_src[pkt]]]
                        dsc = dist[rs, c]
                        dtc = dist[rt, c]
                        before = pk_bal[pkt] < 0
                        best = NEVER
                        ties = 0
                        fwd = False
                        for p in range(deg[c]):
                            n = nbr[c, p]
                            up_t = dist[rt, n] > dtc
                            if routing == R_MIN:
                                if up_t:
                                    continue
                                cls = 0
                            else:
                                up_s = dist[rs, n] > dsc
                                if up_s and not up_t:
                                    cls = 0
                                elif before and up_s and up_t:
                                    cls = 1
                                elif (not before) and (not up_s) and (not up_t):
                                    cls = 1
                                else:
                                    continue
                            o = _occupancy(base + p, V, IB, F, req_cnt, ob_used, credit, True) + penalty * cls
                            if o < best:
                                best = o
                                chosen = p
                                fwd = cls == 0
                                ties = 1
                            elif o == best:
                                ties += 1
                                if _randint(alloc_state, 0, ties) == 0:
                                    chosen = p
                                    fwd = cls == 0
                        if chosen >= 0 and fwd:
                            pk_bal[pkt] += 2
                    if chosen < 0:
                        counters[9] = ep_switch[pk_src[pkt]]
                        counters[10] = dleaf
                        counters[11] = c
                        status = ST_CORNER
                        break
                    out_gp = base + chosen
                    pk_hop[pkt] = h + 1
                pk_out[pkt] = out_gp
                pk_ovc[pkt] = ovc
                k = req_cnt[out_gp]
                req_ig[out_gp, k] = gp
                req_v[out_gp, k] = v
                req_ov[out_gp, k] = ovc
                req_cnt[out_gp] += 1
            elif kind == EV_CREDIT:
                credit[a, b] += 1
                if credit[a, b] > IB:
                    counters[9] = a
                    counters[10] = b
                    status = ST_CREDIT
                    break
            elif kind == EV_INJ_CREDIT:
                inj_credit[a] += 1
            elif kind == EV_OB_FREE:
                ob_used[a, b] -= 1
            else:  # EV_DELIVER
                pkt = a
                m = pk_msg[pkt]
                if T >= warmup and T < measure_end:
                    counters[3] += F
                delivered += 1
                last_move = T
                hh = pk_hop[pkt]
                if hh >= hop_hist.shape[0]:
                    hh = hop_hist.shape[0] - 1
                hop_hist[hh] += 1
                msg_left[m] -= 1
                if msg_left[m] == 0:
                    counters[6] += 1
                    g = msg_gen[m]
                    if g >= warmup and g < measure_end:
                        lat = T - g
                        if lat >= lat_hist.shape[1]:
                            lat = lat_hist.shape[1] - 1
                        lat_hist[msg_cls[m], lat] += 1
                        outstanding_window -= 1
                    msg_free[msg_top] = m
                    msg_top += 1
                    if pattern == P_ALL2ALL:
                        a2a_remaining -= 1
                        if a2a_remaining == 0:
                            counters[5] = T
                pk_free[pk_top] = pkt
                pk_top += 1
        wheel_n[slot] = 0
        if status != ST_OK:
            break

        # 2. crossbar allocation
        off = _randint(alloc_state, 0, GP)
        for i in range(GP):
            og = i + off
            if og >= GP:
                og -= GP
            if req_cnt[og] == 0:
                continue
            room = False
            for v in range(V):
                if ob_used[og, v] < OB:
                    room = True
                    break
            if not room:
                continue
            for lane in range(SP):
                if out_lane[og, lane] > T:
                    continue
                nc = 0
                for r in range(req_cnt[og]):
                    if ob_used[og, req_ov[og, r]] >= OB:
                        continue
                    ig = req_ig[og, r]
                    free_in = False
                    for il in range(SP):
                        if in_lane[ig, il] <= T:
                            free_in = True
                            break
                    if free_in:
                        cand_buf[nc] = r
                        nc += 1
                if nc == 0:
                    break
                r = cand_buf[_randint(alloc_state, 0, nc)]
                ig = req_ig[og, r]
                v = req_v[og, r]
                last = req_cnt[og] - 1
                req_ig[og, r] = req_ig[og, last]
                req_v[og, r] = req_v[og, last]
                req_ov[og, r] = req_ov[og, last]
                req_cnt[og] = last
                pkt = ib_fifo[ig, v, ib_head[ig, v]]
                ib_head[ig, v] = ib_head[ig, v] + 1 if ib_head[ig, v] + 1 < IB else 0
                ib_cnt[ig, v] -= 1
                for il in range(SP):
                    if in_lane[ig, il] <= T:
                        in_lane[ig, il] = T + F
                        break
                out_lane[og, lane] = T + F
                ok = True
                up = port_peer[ig]
                if up >= 0:
                    ok = _push(wheel, wheel_n, T + F + link_lat, EV_CREDIT, up, v)
                else:
                    ok = _push(wheel, wheel_n, T + F + link_lat, EV_INJ_CREDIT, port_ep[ig], 0)
                if ib_cnt[ig, v] > 0:
                    nxt_pkt = ib_fifo[ig, v, ib_head[ig, v]]
                    t_head = max(T + 1, pk_arr[nxt_pkt] + router_delay)
                    ok = ok and _push(wheel, wheel_n, t_head, EV_HEAD, ig, v)
                if not ok:
                    status = ST_OVERFLOW
                    break
                ov = pk_ovc[pkt]
                pos = (ob_head[og, ov] + ob_cnt[og, ov]) % OB
                ob_fifo[og, ov, pos] = pkt
                ob_cnt[og, ov] += 1
                ob_tot[og] += 1
                ob_used[og, ov] += 1
                pk_ready[pkt] = T + 1
                last_move = T
            if status != ST_OK:
                break
        if status != ST_OK:
            break

        # 3. links
        for og in range(GP):
            if ob_tot[og] == 0 or link_free[og] > T:
                continue
            inter = port_peer[og] >= 0
            for j in range(V):
                v = rr_vc[og] + j
                if v >= V:
                    v -= V
                if ob_cnt[og, v] == 0:
                    continue
                pkt = ob_fifo[og, v, ob_head[og, v]]
                if pk_ready[pkt] > T:
                    continue
                if inter and credit[og, v] == 0:
                    continue
                ob_head[og, v] = ob_head[og, v] + 1 if ob_head[og, v] + 1 < OB else 0
                ob_cnt[og, v] -= 1
                ob_tot[og] -= 1
                link_free[og] = T + F
                rr_vc[og] = v + 1 if v + 1 < V else 0
                ok = _push(wheel, wheel_n, T + F, EV_OB_FREE, og, v)
                if inter:
                    credit[og, v] -= 1
                    ok = ok and _push(wheel, wheel_n, T + link_lat, EV_ARRIVE, pkt, port_peer[og] * V + v)
                else:
                    ok = ok and _push(wheel, wheel_n, T + link_lat + F - 1, EV_DELIVER, pkt, 0)
                if not ok:
                    status = ST_OVERFLOW
                if T >= warmup and T < measure_end:
                    link_flits[og] += F
                last_move = T
                break
            if status != ST_OK:
                break
        if status != ST_OK:
            break

        # 4. injection
        for e in range(n_ep_active):
            if cur_left[e] == 0 and ep_next[e, 0] <= T:
                if msg_top == 0:
                    status = ST_OVERFLOW
                    break
                msg_top -= 1
                m = msg_free[msg_top]
                size = ep_next[e, 2]
                msg_left[m] = size
                msg_gen[m] = ep_next[e, 0]
                msg_cls[m] = ep_next[e, 3]
                if msg_gen[m] >= warmup and msg_gen[m] < measure_end:
                    counters[4] += size * F
                    counters[13 + ep_next[e, 3]] += size * F
                    outstanding_window += 1
                cur_msg[e] = m
                cur_left[e] = size
                cur_dst[e] = ep_next[e, 1]
                if pattern == P_ALL2ALL:
                    k = a2a_k[e]
                    if k < a2a_tasks - 1:
                        ep_next[e, 1] = (e + 1 + k) % a2a_tasks
                        a2a_k[e] = k + 1
                    else:
                        ep_next[e, 0] = NEVER
                else:
                    _draw_message(e, ep_next[e, 0], False, gen_p, p_mice, big, pattern, S,
                                  ep_switch, ep_rng, perm, leaf_perm, leaf_row, leaf_ep_off,
                                  leaf_eps, half_of_leaf, half_off, half_eps, tmp)
                    for j in range(4):
                        ep_next[e, j] = tmp[j]
            if cur_left[e] > 0 and inj_free[e] <= T and inj_credit[e] > 0:
                if pk_top == 0:
                    status = ST_OVERFLOW
                    break
                pk_top -= 1
                pkt = pk_free[pk_top]
                d = cur_dst[e]
                pk_src[pkt] = e
                pk_dst[pkt] = d
                pk_hop[pkt] = 0
                pk_msg[pkt] = cur_msg[e]
                sl = ep_switch[e]
                dl = ep_switch[d]
                pk_bal[pkt] = -dist[leaf_row[dl], sl]
                if routing == R_KSP and sl != dl:
                    lo = pair_off[leaf_row[sl] * L + leaf_row[dl]]
                    hi = pair_off[leaf_row[sl] * L + leaf_row[dl] + 1]
                    pk_path[pkt] = lo + _randint(ep_rng, e, hi - lo)
                inj_credit[e] -= 1
                inj_free[e] = T + F
                cur_left[e] -= 1
                injected += 1
                if not _push(wheel, wheel_n, T + link_lat, EV_ARRIVE, pkt, ep_gp[e] * V):
                    status = ST_OVERFLOW
                    break
                last_move = T
        if status != ST_OK:
            break

        # 5. invariants
        in_flight = injected - delivered
        if in_flight > 0 and T - last_move > stall_window:
            counters[7] = T
            status = ST_DEADLOCK
            break
        if check_every > 0 and T % check_every == 0:
            status = _check(T, W, wheel, wheel_n, V, IB, OB, port_peer, port_ep, ep_gp,
                            ib_cnt, ob_cnt, ob_used, credit, inj_credit, injected, delivered,
                            P - pk_top, counters)
            counters[12] += 1
            if status != ST_OK:
                break

        T += 1
        if T == measure_end and drain > 0:
            end = min(max_cycles, T + drain)
        if T >= measure_end and drain > 0 and outstanding_window == 0:
            pending = False
            for e in range(n_ep_active):
                if ep_next[e, 0] < measure_end:
                    pending = True
                    break
            if not pending:
                break
        if pattern == P_ALL2ALL and a2a_remaining == 0:
            break

    counters[0] = T
    counters[1] = injected
    counters[2] = delivered
    counters[8] = injected - delivered
    # window messages still in flight, plus sources still holding one in their queue
    counters[15] = outstanding_window
    if drain > 0:
        for e in range(n_ep_active):
            if ep_next[e, 0] >= warmup and ep_next[e, 0] < measure_end:
                counters[15] += 1
    if status == ST_OK and check_every > 0:
        status = _check(T, W, wheel, wheel_n, V, IB, OB, port_peer, port_ep, ep_gp,
                        ib_cnt, ob_cnt, ob_used, credit, inj_credit, injected, delivered,
                        P - pk_top, counters)
        counters[12] += 1
    counters[16] = trace_pos
    return status


@nb.njit(cache=True)
def _check(T, W, wheel, wheel_n, V, IB, OB, port_peer, port_ep, ep_gp,
           ib_cnt, ob_cnt, ob_used, credit, inj_credit, injected, delivered, pool_used,
           counters):
    """Credit conservation per (link, VC) and packet conservation."""
    GP = port_peer.shape[0]
    arriving = np.zeros((GP, V), dtype=np.int64)
    returning = np.zeros((GP, V), dtype=np.int64)
    inj_returning = np.zeros(ep_gp.shape[0], dtype=np.int64)
    ob_freeing = np.zeros((GP, V), dtype=np.int64)
    delivering = 0
    for s in range(W):
        for k in range(wheel_n[s]):
            kind = wheel[s, k, 0]
            a = wheel[s, k, 1]
            b = wheel[s, k, 2]
            if kind == EV_ARRIVE:
                arriving[b // V, b % V] += 1
            elif kind == EV_CREDIT:
                returning[a, b] += 1
            elif kind == EV_INJ_CREDIT:
                inj_returning[a] += 1
            elif kind == EV_OB_FREE:
                ob_freeing[a, b] += 1
            elif kind == EV_DELIVER:
                delivering += 1
    held = delivering
    for gp in range(GP):
        for v in range(V):
            held += ib_cnt[gp, v] + ob_cnt[gp, v] + arriving[gp, v]
            if ob_used[gp, v] != ob_cnt[gp, v] + ob_freeing[gp, v] or ob_used[gp, v] > OB:
                counters[9] = gp
                counters[10] = v
                counters[11] = T
                return ST_CREDIT
            peer = port_peer[gp]
            if peer >= 0:
                total = credit[gp, v] + ib_cnt[peer, v] + arriving[peer, v] + returning[gp, v]
                if total != IB or credit[gp, v] < 0:
                    counters[9] = gp
                    counters[10] = v
                    counters[11] = T
                    return ST_CREDIT
    for e in range(ep_gp.shape[0]):
        gp = ep_gp[e]
        total = inj_credit[e] + ib_cnt[gp, 0] + arriving[gp, 0] + inj_returning[e]
        if total != IB or inj_credit[e] < 0:
            counters[9] = gp
            counters[10] = 0
            counters[11] = T
            return ST_CREDIT
    if held != injected - delivered or pool_used != injected - delivered:
        counters[9] = held
        counters[10] = injected - delivered
        counters[11] = T
        return ST_LOSS
    return ST_OK
