use super::{Assignment, SystemState};
use crate::cgraph::{Load, MessageCluster, TaskCluster};
use crate::model::{Architecture, Coord, Endpoint, Link, PeId};

/// Whether `route` is a connected path of mesh links from `a` to `b`.
/// Co-located endpoints need the empty route.
pub(crate) fn connects(arch: &Architecture, route: &[Link], a: Coord, b: Coord) -> bool {
    if a == b {
        return route.is_empty();
    }
    let (Some(first), Some(last)) = (route.first(), route.last()) else {
        return false;
    };
    *first == Link::inject(a)
        && *last == Link::eject(b)
        && route.windows(2).all(|w| w[0].to == w[1].from && matches!(w[0].to, Endpoint::Router(_)))
        && route.iter().all(|l| arch.link_index(l).is_some())
}

/// Routers a connected route passes through.
pub(crate) fn traversed(route: &[Link]) -> u32 {
    route.len().saturating_sub(1) as u32
}

/// C.1: the route connects the PEs of both (bound) endpoints within the
/// cluster's hop budget.
pub fn check_c1(arch: &Architecture, route: &[Link], mc: &MessageCluster, asg: &Assignment) -> bool {
    let (Some(a), Some(b)) = (asg.pe(mc.src), asg.pe(mc.dst)) else {
        return false;
    };
    connects(arch, route, arch.coord(a), arch.coord(b)) && traversed(route) <= mc.hop
}

/// C.2: every link of the route has room for the cluster's slots.
pub fn check_c2(state: &SystemState, route: &[Link], mc: &MessageCluster) -> bool {
    let sl_max = state.arch().sl_max();
    route.iter().all(|l| match state.arch().link_index(l) {
        Some(i) => state.link_used(i) + mc.sl <= sl_max,
        None => false,
    })
}

/// C.3: the PE is available and of the cluster's resource type.
pub fn check_c3(state: &SystemState, pe: PeId, tc: &TaskCluster) -> bool {
    state.is_available(pe) && state.arch().pe(pe).rtype == tc.rtype
}

/// C.4: the PE's load stays at or below 100 %.
pub fn check_c4(state: &SystemState, pe: PeId, tc: &TaskCluster) -> bool {
    state.load_units(pe) + tc.load.units() <= Load::ONE
}

/// C.5: the task count stays within every sharing cluster's `K_max`.
pub fn check_c5(state: &SystemState, pe: PeId, tc: &TaskCluster) -> bool {
    let cap = state.task_cap(pe).map_or(tc.k_max, |c| c.min(tc.k_max));
    state.task_count(pe) + tc.size() as u32 <= cap
}

/// Priority levels for `tc` on `pe`: its own levels moved up by the
/// smallest common offset that clears every level already taken there.
/// Relative order and spacing are preserved.
pub fn shift_priorities(state: &SystemState, pe: PeId, tc: &TaskCluster) -> Vec<u32> {
    let taken = state.occupied_levels(pe);
    let mut offset = 0;
    while tc.prios.iter().any(|p| taken.contains(&(p + offset))) {
        offset += 1;
    }
    tc.prios.iter().map(|p| p + offset).collect()
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::model::{xy_route, ResourceTypeId};
    use crate::rtm::{AppId, Resident};

    fn state() -> SystemState {
        SystemState::new(Arc::new(Architecture::homogeneous(3, 3, 1.0, 10).unwrap()))
    }

    fn tc(load: f64, size: usize, k_max: u32) -> TaskCluster {
        TaskCluster {
            id: 0,
            members: vec![],
            rtype: ResourceTypeId(0),
            load: Load::from_fraction(load).unwrap(),
            k_max,
            prios: (0..size as u32).collect(),
        }
    }

    fn mc(hop: u32, sl: u32) -> MessageCluster {
        MessageCluster { id: 0, src: 0, dst: 1, sl, hop, members: vec![] }
    }

    fn resident(load: f64, tasks: u32, k_max: u32, prios: Vec<u32>) -> Resident {
        Resident { app: AppId(9), cluster: 0, load: Load::from_fraction(load).unwrap().units(), tasks, k_max, prios }
    }

    fn pe(s: &SystemState, x: u16, y: u16) -> PeId {
        s.arch().pe_at(Coord::new(x, y)).unwrap()
    }

    fn bound(a: PeId, b: PeId) -> Assignment {
        Assignment { bind: vec![Some(a), Some(b)], routes: vec![None], prios: vec![vec![], vec![]] }
    }

    #[test]
    fn c1_examples() {
        let s = state();
        let arch = s.arch();
        let (a, b) = (pe(&s, 0, 0), pe(&s, 1, 0));
        assert!(check_c1(arch, &[], &mc(2, 1), &bound(a, a)));
        let far = pe(&s, 2, 0);
        assert!(!check_c1(arch, &xy_route(arch.coord(a), arch.coord(far)), &mc(2, 1), &bound(a, far)));
        let route = xy_route(arch.coord(a), arch.coord(b));
        assert!(check_c1(arch, &route, &mc(2, 1), &bound(a, b)));
        assert!(!check_c1(arch, &route[..2], &mc(2, 1), &bound(a, b)), "missing ejection");
        assert!(!check_c1(arch, &[], &mc(2, 1), &bound(a, b)));
        let unbound = Assignment { bind: vec![Some(a), None], ..bound(a, b) };
        assert!(!check_c1(arch, &route, &mc(2, 1), &unbound));
    }

    #[test]
    fn c2_examples() {
        let mut s = state();
        let (a, b) = (pe(&s, 0, 0), pe(&s, 1, 0));
        let route = xy_route(s.arch().coord(a), s.arch().coord(b));
        assert!(check_c2(&s, &route, &mc(2, 10)));
        assert!(check_c2(&s, &[], &mc(2, 10)));
        let l = s.arch().link_index(&route[1]).unwrap();
        s.add_slots(l, 6);
        assert!(!check_c2(&s, &route, &mc(2, 5)));
        assert!(check_c2(&s, &route, &mc(2, 4)));
    }

    #[test]
    fn c3_examples() {
        let mut s = state();
        let p = pe(&s, 1, 1);
        assert!(check_c3(&s, p, &tc(0.1, 1, 5)));
        let mut other = tc(0.1, 1, 5);
        other.rtype = ResourceTypeId(1);
        assert!(!check_c3(&s, p, &other));
        s.set_available(p, false);
        assert!(!check_c3(&s, p, &tc(0.1, 1, 5)));
    }

    #[test]
    fn c4_examples() {
        let mut s = state();
        let p = pe(&s, 0, 0);
        s.push_resident(p, resident(0.6, 1, 5, vec![0]));
        assert!(check_c4(&s, p, &tc(0.3, 1, 5)));
        assert!(!check_c4(&s, p, &tc(0.4, 1, 5)), "both quantized upwards");
        s.pop_resident(p);
        s.push_resident(p, resident(0.75, 1, 5, vec![0]));
        assert!(check_c4(&s, p, &tc(0.25, 1, 5)), "exactly full is allowed");
        s.pop_resident(p);
        s.push_resident(p, resident(0.9, 1, 5, vec![0]));
        assert!(!check_c4(&s, p, &tc(0.2, 1, 5)));
    }

    #[test]
    fn c5_examples() {
        let mut s = state();
        let p = pe(&s, 0, 0);
        assert!(check_c5(&s, p, &tc(0.1, 2, 4)));
        s.push_resident(p, resident(0.1, 1, 5, vec![1]));
        s.push_resident(p, resident(0.1, 1, 5, vec![2]));
        let pair = tc(0.1, 2, 4);
        assert!(check_c5(&s, p, &pair));
        s.push_resident(p, resident(0.1, 2, 4, vec![3, 5]));
        assert!(!check_c5(&s, p, &tc(0.1, 1, 5)), "cap of 4 reached");
        assert!(!check_c5(&s, p, &tc(0.0, 1, 100)));
    }

    #[test]
    fn priority_shift() {
        let mut s = state();
        let p = pe(&s, 0, 0);
        let mut incoming = tc(0.1, 2, 4);
        incoming.prios = vec![1, 3];
        assert_eq!(shift_priorities(&s, p, &incoming), vec![1, 3], "empty PE");
        s.push_resident(p, resident(0.1, 1, 5, vec![1]));
        s.push_resident(p, resident(0.1, 1, 5, vec![2]));
        let shifted = shift_priorities(&s, p, &incoming);
        assert_eq!(shifted, vec![3, 5]);
        incoming.prios = shifted.clone();
        assert_eq!(shift_priorities(&s, p, &incoming), shifted);
    }
}
