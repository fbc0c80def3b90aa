//! Fixed-width little-endian operating-point format.
//!
//! ```text
//! task cluster     10 B  id|last:1  n_tasks:1  rtype:1  k_max:1  load:2 (Q1.15)  prio_order:4
//! message cluster   6 B  id|last:1  hop:1      sl:2     src:1    dst:1
//! edge              4 B  src:1      dst:1      kind:1   reserved:1
//! objective         4 B  f32
//! ```
//!
//! Records appear in that order. Bit 7 of the id byte marks the final
//! record of the task-cluster and of the message-cluster section, so a
//! point needs no count header and its length is exactly
//! `|T_C|*10 + |C|*6 + |E_C|*4 + n_obj*4`. `prio_order` is the Lehmer code
//! of the members' relative priority order. See `docs/formats.md`.

use super::{CgEdge, CgError, ConstraintGraph, Load, MessageCluster, OperatingPoint, TaskCluster};
use crate::dse::ObjectiveVector;
use crate::model::ResourceTypeId;

pub const TASK_CLUSTER_RECORD: usize = 10;
pub const MESSAGE_CLUSTER_RECORD: usize = 6;
pub const EDGE_RECORD: usize = 4;
pub const OBJECTIVE_RECORD: usize = 4;
pub const CONTAINER_MAGIC: [u8; 4] = *b"HMOP";

const LAST: u8 = 0x80;
const MAX_ID: usize = 0x7f;
const EDGE_TASK_TO_MESSAGE: u8 = 0;
const EDGE_MESSAGE_TO_TASK: u8 = 1;

pub fn size_cg(task_clusters: usize, message_clusters: usize, edges: usize) -> usize {
    task_clusters * TASK_CLUSTER_RECORD + message_clusters * MESSAGE_CLUSTER_RECORD + edges * EDGE_RECORD
}

pub fn size_op(task_clusters: usize, message_clusters: usize, edges: usize, n_obj: usize) -> usize {
    size_cg(task_clusters, message_clusters, edges) + n_obj * OBJECTIVE_RECORD
}

fn narrow(field: &'static str, value: u64) -> Result<u8, CgError> {
    u8::try_from(value).map_err(|_| CgError::FieldOverflow { field, value })
}

/// Lehmer code of the relative order of distinct priorities.
fn encode_order(prios: &[u32]) -> Result<u32, CgError> {
    let n = prios.len();
    let mut code: u128 = 0;
    for i in 0..n {
        let smaller_after = prios[i + 1..].iter().filter(|&&p| p < prios[i]).count() as u128;
        code = code.saturating_add(smaller_after.saturating_mul(factorial(n - 1 - i)));
    }
    u32::try_from(code)
        .map_err(|_| CgError::FieldOverflow { field: "prio_order", value: code.min(u128::from(u64::MAX)) as u64 })
}

/// Ranks 0..n in the order described by a Lehmer code.
fn decode_order(n: usize, mut code: u128) -> Result<Vec<u32>, CgError> {
    let mut pool: Vec<u32> = (0..n as u32).collect();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let f = factorial(n - 1 - i);
        let d = (code / f) as usize;
        code %= f;
        if d >= pool.len() {
            return Err(CgError::Malformed("priority order code out of range".into()));
        }
        out.push(pool.remove(d));
    }
    if code != 0 {
        return Err(CgError::Malformed("priority order code out of range".into()));
    }
    Ok(out)
}

fn factorial(k: usize) -> u128 {
    (1..=k as u128).fold(1u128, |acc, x| acc.saturating_mul(x))
}

/// Serialize one operating point.
pub fn serialize_op(op: &OperatingPoint) -> Result<Vec<u8>, CgError> {
    let cg = &op.cg;
    let ntc = cg.task_clusters.len();
    let nmc = cg.message_clusters.len();
    if ntc > MAX_ID + 1 {
        return Err(CgError::FieldOverflow { field: "task cluster count", value: ntc as u64 });
    }
    if nmc > MAX_ID + 1 {
        return Err(CgError::FieldOverflow { field: "message cluster count", value: nmc as u64 });
    }
    if ntc == 0 && (nmc > 0 || !cg.edges.is_empty()) {
        return Err(CgError::Malformed("message clusters or edges without task clusters".into()));
    }
    if nmc == 0 && !cg.edges.is_empty() {
        return Err(CgError::Malformed("edges without message clusters".into()));
    }

    let values = op.objectives.values();
    let mut out = Vec::with_capacity(size_op(ntc, nmc, cg.edges.len(), values.len()));
    for (i, tc) in cg.task_clusters.iter().enumerate() {
        if usize::from(tc.id) != i {
            return Err(CgError::Malformed(format!("task cluster {i} has id {}", tc.id)));
        }
        let mut id = tc.id;
        if i + 1 == ntc {
            id |= LAST;
        }
        out.push(id);
        out.push(narrow("n_tasks", tc.size() as u64)?);
        out.push(tc.rtype.0);
        out.push(narrow("k_max", u64::from(tc.k_max))?);
        out.extend_from_slice(&tc.load.0.to_le_bytes());
        let mut distinct = tc.prios.clone();
        distinct.sort_unstable();
        distinct.dedup();
        if distinct.len() != tc.prios.len() {
            return Err(CgError::Malformed(format!("task cluster {i} has duplicate priorities")));
        }
        out.extend_from_slice(&encode_order(&tc.prios)?.to_le_bytes());
    }
    for (i, mc) in cg.message_clusters.iter().enumerate() {
        if usize::from(mc.id) != i {
            return Err(CgError::Malformed(format!("message cluster {i} has id {}", mc.id)));
        }
        for end in [mc.src, mc.dst] {
            if usize::from(end) >= ntc {
                return Err(CgError::UnknownCluster { kind: "task", id: end });
            }
        }
        let mut id = mc.id;
        if i + 1 == nmc {
            id |= LAST;
        }
        out.push(id);
        out.push(narrow("hop", u64::from(mc.hop))?);
        let sl = u16::try_from(mc.sl).map_err(|_| CgError::FieldOverflow { field: "sl", value: u64::from(mc.sl) })?;
        out.extend_from_slice(&sl.to_le_bytes());
        out.push(mc.src);
        out.push(mc.dst);
    }
    for e in &cg.edges {
        let (src, dst, kind) = match *e {
            CgEdge::TaskToMessage(t, m) => (t, m, EDGE_TASK_TO_MESSAGE),
            CgEdge::MessageToTask(m, t) => (m, t, EDGE_MESSAGE_TO_TASK),
        };
        check_edge(src, dst, kind, ntc, nmc)?;
        out.extend_from_slice(&[src, dst, kind, 0]);
    }
    for v in values {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    Ok(out)
}

fn check_edge(src: u8, dst: u8, kind: u8, ntc: usize, nmc: usize) -> Result<(), CgError> {
    let (t, m) = match kind {
        EDGE_TASK_TO_MESSAGE => (src, dst),
        EDGE_MESSAGE_TO_TASK => (dst, src),
        _ => return Err(CgError::Malformed(format!("unknown edge kind {kind}"))),
    };
    if usize::from(t) >= ntc {
        return Err(CgError::UnknownCluster { kind: "task", id: t });
    }
    if usize::from(m) >= nmc {
        return Err(CgError::UnknownCluster { kind: "message", id: m });
    }
    Ok(())
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    end: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CgError> {
        if self.pos + n > self.end {
            return Err(CgError::Truncated { needed: self.pos + n, available: self.end });
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn remaining(&self) -> usize {
        self.end - self.pos
    }
}

/// Inverse of [`serialize_op`]. Design-time member lists are not part of
/// the format and come back empty.
pub fn deserialize_op(bytes: &[u8], n_obj: usize) -> Result<OperatingPoint, CgError> {
    let obj_len = n_obj * OBJECTIVE_RECORD;
    if bytes.len() < obj_len {
        return Err(CgError::Truncated { needed: obj_len, available: bytes.len() });
    }
    let mut r = Reader { bytes, pos: 0, end: bytes.len() - obj_len };
    let mut cg = ConstraintGraph::default();

    if r.remaining() > 0 {
        loop {
            let rec = r.take(TASK_CLUSTER_RECORD)?;
            let id = rec[0] & !LAST;
            if usize::from(id) != cg.task_clusters.len() {
                return Err(CgError::Malformed(format!("task cluster record {} has id {id}", cg.task_clusters.len())));
            }
            let n = usize::from(rec[1]);
            let order = u32::from_le_bytes([rec[6], rec[7], rec[8], rec[9]]);
            cg.task_clusters.push(TaskCluster {
                id,
                members: Vec::new(),
                rtype: ResourceTypeId(rec[2]),
                k_max: u32::from(rec[3]),
                load: Load(u16::from_le_bytes([rec[4], rec[5]])),
                prios: decode_order(n, u128::from(order))?,
            });
            if rec[0] & LAST != 0 {
                break;
            }
        }
    }
    if r.remaining() > 0 {
        loop {
            let rec = r.take(MESSAGE_CLUSTER_RECORD)?;
            let id = rec[0] & !LAST;
            if usize::from(id) != cg.message_clusters.len() {
                return Err(CgError::Malformed(format!(
                    "message cluster record {} has id {id}",
                    cg.message_clusters.len()
                )));
            }
            let (src, dst) = (rec[4], rec[5]);
            for end in [src, dst] {
                if usize::from(end) >= cg.task_clusters.len() {
                    return Err(CgError::UnknownCluster { kind: "task", id: end });
                }
            }
            cg.message_clusters.push(MessageCluster {
                id,
                hop: u32::from(rec[1]),
                sl: u32::from(u16::from_le_bytes([rec[2], rec[3]])),
                src,
                dst,
                members: Vec::new(),
            });
            if rec[0] & LAST != 0 {
                break;
            }
        }
    }
    if !r.remaining().is_multiple_of(EDGE_RECORD) {
        let needed = r.end + EDGE_RECORD - r.remaining() % EDGE_RECORD;
        return Err(CgError::Truncated { needed, available: r.end });
    }
    let (ntc, nmc) = (cg.task_clusters.len(), cg.message_clusters.len());
    while r.remaining() > 0 {
        let rec = r.take(EDGE_RECORD)?;
        check_edge(rec[0], rec[1], rec[2], ntc, nmc)?;
        cg.edges.push(if rec[2] == EDGE_TASK_TO_MESSAGE {
            CgEdge::TaskToMessage(rec[0], rec[1])
        } else {
            CgEdge::MessageToTask(rec[0], rec[1])
        });
    }

    let values: Vec<f64> = bytes[bytes.len() - obj_len..]
        .chunks_exact(OBJECTIVE_RECORD)
        .map(|c| f64::from(f32::from_le_bytes([c[0], c[1], c[2], c[3]])))
        .collect();
    let objectives = if values.is_empty() {
        ObjectiveVector { energy: 0.0, msg_count: 0, avg_hop: 0.0, min_hop: 0, alloc_per_type: Vec::new() }
    } else {
        ObjectiveVector::from_values(&values).map_err(|e| CgError::Malformed(e.to_string()))?
    };
    Ok(OperatingPoint { cg, objectives })
}

/// Container: magic, `n_obj` (u16), point count (u32), then each point
/// prefixed with its length (u32). All little-endian.
pub fn write_container(points: &[OperatingPoint]) -> Result<Vec<u8>, CgError> {
    let n_obj = points.first().map_or(0, |p| p.objectives.dim());
    let mut out = Vec::new();
    out.extend_from_slice(&CONTAINER_MAGIC);
    let n = u16::try_from(n_obj).map_err(|_| CgError::FieldOverflow { field: "n_obj", value: n_obj as u64 })?;
    out.extend_from_slice(&n.to_le_bytes());
    out.extend_from_slice(&(points.len() as u32).to_le_bytes());
    for p in points {
        if p.objectives.dim() != n_obj {
            return Err(CgError::Malformed("operating points disagree on objective count".into()));
        }
        let bytes = serialize_op(p)?;
        out.extend_from_slice(&(bytes.len() as u32).to_le_bytes());
        out.extend_from_slice(&bytes);
    }
    Ok(out)
}

pub fn read_container(bytes: &[u8]) -> Result<Vec<OperatingPoint>, CgError> {
    let mut r = Reader { bytes, pos: 0, end: bytes.len() };
    if r.take(4)? != CONTAINER_MAGIC {
        return Err(CgError::BadMagic);
    }
    let h = r.take(2)?;
    let n_obj = usize::from(u16::from_le_bytes([h[0], h[1]]));
    let c = r.take(4)?;
    let count = u32::from_le_bytes([c[0], c[1], c[2], c[3]]);
    let mut points = Vec::new();
    for _ in 0..count {
        let l = r.take(4)?;
        let len = u32::from_le_bytes([l[0], l[1], l[2], l[3]]) as usize;
        points.push(deserialize_op(r.take(len)?, n_obj)?);
    }
    if r.remaining() != 0 {
        return Err(CgError::Malformed(format!("{} trailing bytes after the last point", r.remaining())));
    }
    Ok(points)
}
