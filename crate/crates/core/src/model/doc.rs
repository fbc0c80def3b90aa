//! TOML interchange documents for architectures and task graphs.
//!
//! The byte-level schemas with worked examples live in `docs/formats.md`.

use serde::{Deserialize, Serialize};

use super::arch::{Architecture, EnergyModel, ResourceType, ResourceTypeId};
use super::mesh::Coord;
use super::taskgraph::{Edge, MessageSpec, Task, TaskGraph};
use super::ModelError;

fn default_router_cycle() -> f64 {
    super::arch::DEFAULT_ROUTER_CYCLE
}

fn default_flit_bits() -> u32 {
    super::arch::DEFAULT_FLIT_BITS
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ArchDoc {
    width: u16,
    height: u16,
    /// bits per second
    link_capacity: f64,
    sl_max: u32,
    #[serde(default = "default_router_cycle")]
    router_cycle: f64,
    #[serde(default = "default_flit_bits")]
    flit_bits: u32,
    /// One string per row (y = 0 first) of whitespace separated type names.
    #[serde(default)]
    layout: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    unavailable: Vec<[u16; 2]>,
    #[serde(default)]
    energy: EnergyModel,
    types: Vec<ResourceType>,
}

pub fn load_architecture(text: &str) -> Result<Architecture, ModelError> {
    let doc: ArchDoc = toml::from_str(text).map_err(|e| ModelError::Parse(e.to_string()))?;
    if doc.width == 0 {
        return Err(ModelError::invalid("width", "must be at least 1"));
    }
    if doc.height == 0 {
        return Err(ModelError::invalid("height", "must be at least 1"));
    }
    let n = usize::from(doc.width) * usize::from(doc.height);
    let layout: Vec<ResourceTypeId> = if doc.layout.is_empty() {
        if doc.types.len() != 1 {
            return Err(ModelError::invalid("layout", "required when more than one type is declared"));
        }
        vec![ResourceTypeId(0); n]
    } else {
        if doc.layout.len() != usize::from(doc.height) {
            return Err(ModelError::invalid(
                "layout",
                format!("expected {} rows, found {}", doc.height, doc.layout.len()),
            ));
        }
        let mut ids = Vec::with_capacity(n);
        for (y, row) in doc.layout.iter().enumerate() {
            let names: Vec<&str> = row.split_whitespace().collect();
            if names.len() != usize::from(doc.width) {
                return Err(ModelError::invalid(
                    format!("layout[{y}]"),
                    format!("expected {} entries, found {}", doc.width, names.len()),
                ));
            }
            for name in names {
                let pos = doc
                    .types
                    .iter()
                    .position(|t| t.name == name)
                    .ok_or_else(|| ModelError::invalid(format!("layout[{y}]"), format!("unknown type `{name}`")))?;
                ids.push(ResourceTypeId(pos as u8));
            }
        }
        ids
    };
    let mut arch =
        Architecture::new(doc.width, doc.height, doc.types, &layout, doc.link_capacity, doc.sl_max, doc.energy)?
            .with_latency_constants(doc.router_cycle, doc.flit_bits)?;
    for (i, [x, y]) in doc.unavailable.into_iter().enumerate() {
        let pe = arch
            .pe_at(Coord::new(x, y))
            .ok_or_else(|| ModelError::invalid(format!("unavailable[{i}]"), "coordinate outside the mesh"))?;
        arch.set_available(pe, false);
    }
    Ok(arch)
}

pub fn architecture_to_toml(arch: &Architecture) -> String {
    let layout = (0..arch.height())
        .map(|y| {
            (0..arch.width())
                .map(|x| {
                    let pe = arch.pe_at(Coord::new(x, y)).expect("inside mesh");
                    arch.type_name(arch.pe(pe).rtype).to_string()
                })
                .collect::<Vec<_>>()
                .join(" ")
        })
        .collect();
    let unavailable = arch.pes().iter().filter(|p| !p.available).map(|p| [p.coord.x, p.coord.y]).collect();
    let doc = ArchDoc {
        width: arch.width(),
        height: arch.height(),
        link_capacity: arch.link_capacity(),
        sl_max: arch.sl_max(),
        router_cycle: arch.router_cycle(),
        flit_bits: arch.flit_bits(),
        layout,
        unavailable,
        energy: arch.energy(),
        types: arch.types().to_vec(),
    };
    toml::to_string(&doc).expect("architecture document serializes")
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TaskDoc {
    id: String,
    wcet: std::collections::BTreeMap<String, f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MessageDoc {
    id: String,
    size: u64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TaskGraphDoc {
    name: String,
    period: f64,
    deadline: f64,
    #[serde(default)]
    edges: Vec<[String; 2]>,
    #[serde(default)]
    tasks: Vec<TaskDoc>,
    #[serde(default)]
    messages: Vec<MessageDoc>,
}

pub fn load_taskgraph(text: &str) -> Result<TaskGraph, ModelError> {
    let doc: TaskGraphDoc = toml::from_str(text).map_err(|e| ModelError::Parse(e.to_string()))?;
    let tasks = doc.tasks.into_iter().map(|t| Task { id: t.id, wcet: t.wcet }).collect();
    let messages = doc.messages.into_iter().map(|m| MessageSpec { id: m.id, size: m.size }).collect();
    let edges: Vec<(String, String)> = doc.edges.into_iter().map(|[a, b]| (a, b)).collect();
    TaskGraph::new(doc.name, doc.period, doc.deadline, tasks, messages, &edges)
}

pub fn taskgraph_to_toml(g: &TaskGraph) -> String {
    let name_of = |e: &Edge| match *e {
        Edge::TaskToMessage(t, m) => [g.tasks()[t].id.clone(), g.messages()[m].id.clone()],
        Edge::MessageToTask(m, t) => [g.messages()[m].id.clone(), g.tasks()[t].id.clone()],
    };
    let doc = TaskGraphDoc {
        name: g.name().to_string(),
        period: g.period(),
        deadline: g.deadline(),
        edges: g.edges().iter().map(name_of).collect(),
        tasks: g.tasks().iter().map(|t| TaskDoc { id: t.id.clone(), wcet: t.wcet.clone() }).collect(),
        messages: g.messages().iter().map(|m| MessageDoc { id: m.id.clone(), size: m.size }).collect(),
    };
    toml::to_string(&doc).expect("task graph document serializes")
}
