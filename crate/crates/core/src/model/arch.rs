use std::fmt;

use serde::{Deserialize, Serialize};

use super::mesh::{xy_route, Coord, Endpoint, Link};
use super::ModelError;

/// Index into [`Architecture::types`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ResourceTypeId(pub u8);

impl ResourceTypeId {
    pub fn index(self) -> usize {
        usize::from(self.0)
    }
}

/// Row-major index of a PE.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PeId(pub usize);

impl PeId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for PeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "pe{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResourceType {
    pub name: String,
    /// Maximal power draw in watts.
    pub power: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Pe {
    pub coord: Coord,
    pub rtype: ResourceTypeId,
    pub power: f64,
    pub available: bool,
}

/// Per-bit NoC energy coefficients in nJ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyModel {
    pub e_sbit: f64,
    pub e_lbit: f64,
}

impl Default for EnergyModel {
    fn default() -> Self {
        Self { e_sbit: 0.98, e_lbit: 0.0936 }
    }
}

pub const DEFAULT_ROUTER_CYCLE: f64 = 1.0;
pub const DEFAULT_FLIT_BITS: u32 = 32;

/// 2D mesh of typed PEs connected by TDM-arbitrated links.
#[derive(Debug, Clone, PartialEq)]
pub struct Architecture {
    width: u16,
    height: u16,
    types: Vec<ResourceType>,
    pes: Vec<Pe>,
    link_capacity: f64,
    sl_max: u32,
    energy: EnergyModel,
    router_cycle: f64,
    flit_bits: u32,
}

// Link slots per tile: inject, eject, +x, -x, +y, -y.
const LINKS_PER_TILE: usize = 6;

impl Architecture {
    /// Build an architecture from a row-major type layout.
    pub fn new(
        width: u16,
        height: u16,
        types: Vec<ResourceType>,
        layout: &[ResourceTypeId],
        link_capacity: f64,
        sl_max: u32,
        energy: EnergyModel,
    ) -> Result<Self, ModelError> {
        if width == 0 {
            return Err(ModelError::invalid("width", "must be at least 1"));
        }
        if height == 0 {
            return Err(ModelError::invalid("height", "must be at least 1"));
        }
        if types.is_empty() {
            return Err(ModelError::invalid("types", "at least one resource type required"));
        }
        if types.len() > usize::from(u8::MAX) {
            return Err(ModelError::invalid("types", "at most 255 resource types"));
        }
        for (i, t) in types.iter().enumerate() {
            if !(t.power.is_finite() && t.power > 0.0) {
                return Err(ModelError::invalid(format!("types[{i}].power"), "must be > 0"));
            }
            if types[..i].iter().any(|o| o.name == t.name) {
                return Err(ModelError::invalid(format!("types[{i}].name"), "duplicate name"));
            }
        }
        let n = usize::from(width) * usize::from(height);
        if layout.len() != n {
            return Err(ModelError::invalid("layout", format!("expected {n} entries, found {}", layout.len())));
        }
        if !(link_capacity.is_finite() && link_capacity > 0.0) {
            return Err(ModelError::invalid("link_capacity", "must be > 0"));
        }
        if sl_max == 0 || sl_max > u32::from(u16::MAX) {
            return Err(ModelError::invalid("sl_max", "must be in 1..=65535"));
        }
        if !(energy.e_sbit >= 0.0 && energy.e_lbit >= 0.0) {
            return Err(ModelError::invalid("energy", "coefficients must be >= 0"));
        }
        let mut pes = Vec::with_capacity(n);
        for (i, &rtype) in layout.iter().enumerate() {
            let t = types
                .get(rtype.index())
                .ok_or_else(|| ModelError::invalid(format!("layout[{i}]"), "unknown resource type"))?;
            pes.push(Pe {
                coord: Coord::new((i % usize::from(width)) as u16, (i / usize::from(width)) as u16),
                rtype,
                power: t.power,
                available: true,
            });
        }
        Ok(Self {
            width,
            height,
            types,
            pes,
            link_capacity,
            sl_max,
            energy,
            router_cycle: DEFAULT_ROUTER_CYCLE,
            flit_bits: DEFAULT_FLIT_BITS,
        })
    }

    /// Homogeneous mesh with a single resource type.
    pub fn homogeneous(width: u16, height: u16, power: f64, sl_max: u32) -> Result<Self, ModelError> {
        let layout = vec![ResourceTypeId(0); usize::from(width) * usize::from(height)];
        Self::new(
            width,
            height,
            vec![ResourceType { name: "pe".into(), power }],
            &layout,
            1.0e9,
            sl_max,
            EnergyModel::default(),
        )
    }

    pub fn with_latency_constants(mut self, router_cycle: f64, flit_bits: u32) -> Result<Self, ModelError> {
        if !(router_cycle.is_finite() && router_cycle >= 0.0) {
            return Err(ModelError::invalid("router_cycle", "must be >= 0"));
        }
        if flit_bits == 0 {
            return Err(ModelError::invalid("flit_bits", "must be > 0"));
        }
        self.router_cycle = router_cycle;
        self.flit_bits = flit_bits;
        Ok(self)
    }

    pub fn set_available(&mut self, pe: PeId, available: bool) {
        self.pes[pe.index()].available = available;
    }

    pub fn width(&self) -> u16 {
        self.width
    }

    pub fn height(&self) -> u16 {
        self.height
    }

    pub fn types(&self) -> &[ResourceType] {
        &self.types
    }

    pub fn type_id(&self, name: &str) -> Option<ResourceTypeId> {
        self.types.iter().position(|t| t.name == name).map(|i| ResourceTypeId(i as u8))
    }

    pub fn type_name(&self, id: ResourceTypeId) -> &str {
        &self.types[id.index()].name
    }

    pub fn pes(&self) -> &[Pe] {
        &self.pes
    }

    pub fn pe(&self, id: PeId) -> &Pe {
        &self.pes[id.index()]
    }

    pub fn pe_ids(&self) -> impl Iterator<Item = PeId> {
        (0..self.pes.len()).map(PeId)
    }

    pub fn contains(&self, c: Coord) -> bool {
        c.x < self.width && c.y < self.height
    }

    pub fn pe_at(&self, c: Coord) -> Option<PeId> {
        self.contains(c).then(|| PeId(usize::from(c.y) * usize::from(self.width) + usize::from(c.x)))
    }

    pub fn coord(&self, pe: PeId) -> Coord {
        self.pes[pe.index()].coord
    }

    pub fn link_capacity(&self) -> f64 {
        self.link_capacity
    }

    pub fn sl_max(&self) -> u32 {
        self.sl_max
    }

    pub fn energy(&self) -> EnergyModel {
        self.energy
    }

    /// Router traversal time per hop, µs.
    pub fn router_cycle(&self) -> f64 {
        self.router_cycle
    }

    pub fn flit_bits(&self) -> u32 {
        self.flit_bits
    }

    pub fn num_links(&self) -> usize {
        self.pes.len() * LINKS_PER_TILE
    }

    /// Dense index of a link, `None` if the link does not exist in this mesh.
    pub fn link_index(&self, link: &Link) -> Option<usize> {
        let tile = |c: Coord| self.pe_at(c).map(|p| p.index() * LINKS_PER_TILE);
        match (link.from, link.to) {
            (Endpoint::Pe(a), Endpoint::Router(b)) if a == b => tile(a),
            (Endpoint::Router(a), Endpoint::Pe(b)) if a == b => tile(a).map(|t| t + 1),
            (Endpoint::Router(a), Endpoint::Router(b)) => {
                self.contains(b).then_some(())?;
                let dir = match (i32::from(b.x) - i32::from(a.x), i32::from(b.y) - i32::from(a.y)) {
                    (1, 0) => 2,
                    (-1, 0) => 3,
                    (0, 1) => 4,
                    (0, -1) => 5,
                    _ => return None,
                };
                tile(a).map(|t| t + dir)
            }
            _ => None,
        }
    }

    /// Dense link indices of the xy route between two PEs.
    pub fn route_link_ids(&self, a: PeId, b: PeId) -> Vec<usize> {
        xy_route(self.coord(a), self.coord(b))
            .iter()
            .map(|l| self.link_index(l).expect("xy route stays inside the mesh"))
            .collect()
    }
}
