//! Mesh geometry: coordinates, links and deterministic xy-routing.
//!
//! Every PE sits on its own router. A route between two distinct tiles
//! starts with the PE-to-router injection link, walks router-to-router
//! links first along x and then along y, and ends with the router-to-PE
//! ejection link. Communication on the same tile is local and has an
//! empty route.

use std::fmt;

use serde::{Deserialize, Serialize};

/// Position of a tile in the mesh; `x` is the column, `y` the row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Coord {
    pub x: u16,
    pub y: u16,
}

impl Coord {
    pub const fn new(x: u16, y: u16) -> Self {
        Self { x, y }
    }

    pub fn manhattan(self, other: Coord) -> u32 {
        u32::from(self.x.abs_diff(other.x)) + u32::from(self.y.abs_diff(other.y))
    }

    /// Translate by a signed offset, `None` if the result leaves the
    /// non-negative quadrant.
    pub fn offset(self, dx: i32, dy: i32) -> Option<Coord> {
        let x = i32::from(self.x) + dx;
        let y = i32::from(self.y) + dy;
        if x < 0 || y < 0 || x > i32::from(u16::MAX) || y > i32::from(u16::MAX) {
            return None;
        }
        Some(Coord::new(x as u16, y as u16))
    }
}

impl fmt::Display for Coord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.x, self.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Endpoint {
    Pe(Coord),
    Router(Coord),
}

/// A directed link. Opposite directions are distinct links with their
/// own slot budget.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Link {
    pub from: Endpoint,
    pub to: Endpoint,
}

impl Link {
    pub fn inject(at: Coord) -> Self {
        Link { from: Endpoint::Pe(at), to: Endpoint::Router(at) }
    }

    pub fn eject(at: Coord) -> Self {
        Link { from: Endpoint::Router(at), to: Endpoint::Pe(at) }
    }

    pub fn hop(from: Coord, to: Coord) -> Self {
        Link { from: Endpoint::Router(from), to: Endpoint::Router(to) }
    }
}

impl fmt::Display for Link {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.from, self.to) {
            (Endpoint::Pe(c), Endpoint::Router(_)) => write!(f, "inject@{c}"),
            (Endpoint::Router(c), Endpoint::Pe(_)) => write!(f, "eject@{c}"),
            (Endpoint::Router(a), Endpoint::Router(b)) => write!(f, "router{a}->router{b}"),
            (Endpoint::Pe(a), Endpoint::Pe(b)) => write!(f, "pe{a}->pe{b}"),
        }
    }
}

/// Number of routers on the xy route from `a` to `b`; 0 for local
/// communication.
pub fn hop_count(a: Coord, b: Coord) -> u32 {
    if a == b {
        0
    } else {
        a.manhattan(b) + 1
    }
}

/// Routers visited by the xy route, in traversal order.
pub fn xy_routers(a: Coord, b: Coord) -> Vec<Coord> {
    if a == b {
        return Vec::new();
    }
    let mut routers = Vec::with_capacity(a.manhattan(b) as usize + 1);
    let mut cur = a;
    routers.push(cur);
    while cur.x != b.x {
        cur.x = if cur.x < b.x { cur.x + 1 } else { cur.x - 1 };
        routers.push(cur);
    }
    while cur.y != b.y {
        cur.y = if cur.y < b.y { cur.y + 1 } else { cur.y - 1 };
        routers.push(cur);
    }
    routers
}

/// Deterministic xy route including injection and ejection links.
pub fn xy_route(a: Coord, b: Coord) -> Vec<Link> {
    let routers = xy_routers(a, b);
    if routers.is_empty() {
        return Vec::new();
    }
    let mut links = Vec::with_capacity(routers.len() + 1);
    links.push(Link::inject(a));
    links.extend(routers.windows(2).map(|w| Link::hop(w[0], w[1])));
    links.push(Link::eject(b));
    links
}

/// Distinct routers touched by a route.
pub fn route_hops(route: &[Link]) -> u32 {
    let mut routers: Vec<Coord> = route
        .iter()
        .flat_map(|l| [l.from, l.to])
        .filter_map(|e| match e {
            Endpoint::Router(c) => Some(c),
            Endpoint::Pe(_) => None,
        })
        .collect();
    routers.sort_unstable();
    routers.dedup();
    routers.len() as u32
}
