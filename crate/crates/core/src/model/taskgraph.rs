use std::collections::{BTreeMap, HashMap};

use super::ModelError;

/// Index of a task inside its [`TaskGraph`].
pub type TaskIdx = usize;
/// Index of a message inside its [`TaskGraph`].
pub type MsgIdx = usize;

#[derive(Debug, Clone, PartialEq)]
pub struct Task {
    pub id: String,
    /// WCET in µs per resource-type name. A missing entry means the task
    /// cannot run on that type.
    pub wcet: BTreeMap<String, f64>,
}

impl Task {
    pub fn wcet_on(&self, rtype: &str) -> Option<f64> {
        self.wcet.get(rtype).copied()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Message {
    pub id: String,
    /// Payload in bits.
    pub size: u64,
    pub src: TaskIdx,
    pub dst: TaskIdx,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Edge {
    TaskToMessage(TaskIdx, MsgIdx),
    MessageToTask(MsgIdx, TaskIdx),
}

/// Acyclic bipartite graph of tasks and messages executed periodically.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskGraph {
    name: String,
    period: f64,
    deadline: f64,
    tasks: Vec<Task>,
    messages: Vec<Message>,
    edges: Vec<Edge>,
    topo: Vec<Vertex>,
}

/// A vertex of the task graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Vertex {
    Task(TaskIdx),
    Message(MsgIdx),
}

/// Unvalidated message: id, size and edge endpoints given by name.
#[derive(Debug, Clone, PartialEq)]
pub struct MessageSpec {
    pub id: String,
    pub size: u64,
}

impl TaskGraph {
    /// Validate and build a task graph. Edges are given by vertex id.
    pub fn new(
        name: impl Into<String>,
        period: f64,
        deadline: f64,
        tasks: Vec<Task>,
        messages: Vec<MessageSpec>,
        edges: &[(String, String)],
    ) -> Result<Self, ModelError> {
        if !(period.is_finite() && period > 0.0) {
            return Err(ModelError::invalid("period", "must be > 0"));
        }
        if !(deadline.is_finite() && deadline > 0.0) {
            return Err(ModelError::invalid("deadline", "must be > 0"));
        }
        if deadline > period {
            return Err(ModelError::invalid("deadline", "must not exceed the period"));
        }

        let mut index: HashMap<&str, Vertex> = HashMap::new();
        for (i, t) in tasks.iter().enumerate() {
            if t.wcet.is_empty() {
                return Err(ModelError::invalid(format!("tasks[{i}].wcet"), "at least one resource type required"));
            }
            if let Some((ty, w)) = t.wcet.iter().find(|(_, w)| !(w.is_finite() && **w > 0.0)) {
                return Err(ModelError::invalid(
                    format!("tasks[{i}].wcet.{ty}"),
                    format!("must be finite and > 0, got {w}"),
                ));
            }
            if index.insert(&t.id, Vertex::Task(i)).is_some() {
                return Err(ModelError::DuplicateId(t.id.clone()));
            }
        }
        for (i, m) in messages.iter().enumerate() {
            if m.size == 0 {
                return Err(ModelError::invalid(format!("messages[{i}].size"), "must be > 0"));
            }
            if index.insert(&m.id, Vertex::Message(i)).is_some() {
                return Err(ModelError::DuplicateId(m.id.clone()));
            }
        }

        let mut producers: Vec<Vec<TaskIdx>> = vec![Vec::new(); messages.len()];
        let mut consumers: Vec<Vec<TaskIdx>> = vec![Vec::new(); messages.len()];
        let mut resolved = Vec::with_capacity(edges.len());
        for (from, to) in edges {
            let a = *index.get(from.as_str()).ok_or_else(|| ModelError::UnknownVertex(from.clone()))?;
            let b = *index.get(to.as_str()).ok_or_else(|| ModelError::UnknownVertex(to.clone()))?;
            let edge = match (a, b) {
                (Vertex::Task(t), Vertex::Message(m)) => {
                    producers[m].push(t);
                    Edge::TaskToMessage(t, m)
                }
                (Vertex::Message(m), Vertex::Task(t)) => {
                    consumers[m].push(t);
                    Edge::MessageToTask(m, t)
                }
                _ => {
                    return Err(ModelError::NonBipartite { from: from.clone(), to: to.clone() });
                }
            };
            resolved.push(edge);
        }

        let mut msgs = Vec::with_capacity(messages.len());
        for (i, m) in messages.into_iter().enumerate() {
            if producers[i].len() != 1 {
                return Err(ModelError::Producers { message: m.id, count: producers[i].len() });
            }
            if consumers[i].len() != 1 {
                return Err(ModelError::Consumers { message: m.id, count: consumers[i].len() });
            }
            msgs.push(Message { id: m.id, size: m.size, src: producers[i][0], dst: consumers[i][0] });
        }

        let mut g =
            TaskGraph { name: name.into(), period, deadline, tasks, messages: msgs, edges: resolved, topo: Vec::new() };
        g.topo = g.topological_order()?;
        Ok(g)
    }

    // Kahn's algorithm over tasks and messages together.
    fn topological_order(&self) -> Result<Vec<Vertex>, ModelError> {
        let nt = self.tasks.len();
        let mut indeg = vec![0usize; nt];
        let mut out: Vec<Vec<MsgIdx>> = vec![Vec::new(); nt];
        for (mi, m) in self.messages.iter().enumerate() {
            indeg[m.dst] += 1;
            out[m.src].push(mi);
        }
        let mut ready: Vec<TaskIdx> = (0..nt).filter(|&t| indeg[t] == 0).rev().collect();
        let mut order = Vec::with_capacity(nt + self.messages.len());
        while let Some(t) = ready.pop() {
            order.push(Vertex::Task(t));
            for &mi in &out[t] {
                order.push(Vertex::Message(mi));
                let d = self.messages[mi].dst;
                indeg[d] -= 1;
                if indeg[d] == 0 {
                    ready.push(d);
                }
            }
        }
        if let Some(t) = (0..nt).find(|&t| indeg[t] > 0) {
            return Err(ModelError::Cycle(self.tasks[t].id.clone()));
        }
        Ok(order)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Period in µs.
    pub fn period(&self) -> f64 {
        self.period
    }

    /// Relative deadline in µs.
    pub fn deadline(&self) -> f64 {
        self.deadline
    }

    pub fn tasks(&self) -> &[Task] {
        &self.tasks
    }

    pub fn messages(&self) -> &[Message] {
        &self.messages
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Tasks and messages in a topological order.
    pub fn topological(&self) -> &[Vertex] {
        &self.topo
    }

    /// Minimum bandwidth of a message in bits per second.
    pub fn bandwidth(&self, m: MsgIdx) -> f64 {
        self.messages[m].size as f64 / (self.period * 1e-6)
    }

    /// Direct task successors of `t`.
    pub fn successors(&self, t: TaskIdx) -> impl Iterator<Item = TaskIdx> + '_ {
        self.messages.iter().filter(move |m| m.src == t).map(|m| m.dst)
    }

    /// `reach[a][b]` is true when `b` is reachable from `a` through at
    /// least one message. Computed by depth-first search from every task.
    pub fn reachability(&self) -> Vec<Vec<bool>> {
        let n = self.tasks.len();
        let mut succ: Vec<Vec<TaskIdx>> = vec![Vec::new(); n];
        for m in &self.messages {
            succ[m.src].push(m.dst);
        }
        let mut reach = vec![vec![false; n]; n];
        for (start, row) in reach.iter_mut().enumerate() {
            let mut stack = succ[start].clone();
            while let Some(t) = stack.pop() {
                if !row[t] {
                    row[t] = true;
                    stack.extend(succ[t].iter().copied());
                }
            }
        }
        reach
    }
}

/// Convenience builder, mostly for tests and generators.
#[derive(Debug, Default)]
pub struct TaskGraphBuilder {
    name: String,
    period: f64,
    deadline: f64,
    tasks: Vec<Task>,
    messages: Vec<MessageSpec>,
    edges: Vec<(String, String)>,
}

impl TaskGraphBuilder {
    pub fn new(name: impl Into<String>, period: f64, deadline: f64) -> Self {
        Self { name: name.into(), period, deadline, ..Default::default() }
    }

    pub fn task<'a>(mut self, id: &str, wcet: impl IntoIterator<Item = (&'a str, f64)>) -> Self {
        self.tasks.push(Task { id: id.to_string(), wcet: wcet.into_iter().map(|(k, v)| (k.to_string(), v)).collect() });
        self
    }

    /// Adds a message together with its producer and consumer edges.
    pub fn message(mut self, id: &str, size: u64, src: &str, dst: &str) -> Self {
        self.messages.push(MessageSpec { id: id.to_string(), size });
        self.edges.push((src.to_string(), id.to_string()));
        self.edges.push((id.to_string(), dst.to_string()));
        self
    }

    pub fn edge(mut self, from: &str, to: &str) -> Self {
        self.edges.push((from.to_string(), to.to_string()));
        self
    }

    pub fn build(self) -> Result<TaskGraph, ModelError> {
        TaskGraph::new(self.name, self.period, self.deadline, self.tasks, self.messages, &self.edges)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_task_graph() {
        let g = TaskGraphBuilder::new("a", 1000.0, 1000.0).task("t1", [("pe", 100.0)]).build().unwrap();
        assert_eq!(g.tasks().len(), 1);
        assert!(g.messages().is_empty());
    }

    #[test]
    fn chain_graph() {
        let g = TaskGraphBuilder::new("a", 1000.0, 900.0)
            .task("t1", [("pe", 100.0)])
            .task("t2", [("pe", 100.0)])
            .message("m1", 64, "t1", "t2")
            .build()
            .unwrap();
        assert_eq!(g.messages().len(), 1);
        assert_eq!(g.messages()[0].src, 0);
        assert_eq!(g.messages()[0].dst, 1);
        assert_eq!(g.topological(), &[Vertex::Task(0), Vertex::Message(0), Vertex::Task(1)]);
        assert!(g.reachability()[0][1]);
        assert!(!g.reachability()[1][0]);
    }

    #[test]
    fn task_to_task_edge_rejected() {
        let err = TaskGraphBuilder::new("a", 1000.0, 1000.0)
            .task("t1", [("pe", 1.0)])
            .task("t2", [("pe", 1.0)])
            .edge("t1", "t2")
            .build()
            .unwrap_err();
        assert!(matches!(err, ModelError::NonBipartite { .. }));
    }

    #[test]
    fn cycle_rejected() {
        let err = TaskGraphBuilder::new("a", 1000.0, 1000.0)
            .task("t1", [("pe", 1.0)])
            .task("t2", [("pe", 1.0)])
            .message("m1", 8, "t1", "t2")
            .message("m2", 8, "t2", "t1")
            .build()
            .unwrap_err();
        assert!(matches!(err, ModelError::Cycle(_)));
    }

    #[test]
    fn message_needs_single_producer_and_consumer() {
        let err = TaskGraphBuilder::new("a", 1000.0, 1000.0)
            .task("t1", [("pe", 1.0)])
            .task("t2", [("pe", 1.0)])
            .task("t3", [("pe", 1.0)])
            .message("m1", 8, "t1", "t2")
            .edge("m1", "t3")
            .build()
            .unwrap_err();
        assert!(matches!(err, ModelError::Consumers { count: 2, .. }));

        let err = TaskGraphBuilder::new("a", 1000.0, 1000.0)
            .task("t1", [("pe", 1.0)])
            .task("t2", [("pe", 1.0)])
            .message("m1", 8, "t1", "t2")
            .edge("t2", "m1")
            .build()
            .unwrap_err();
        assert!(matches!(err, ModelError::Producers { count: 2, .. }));
    }

    #[test]
    fn deadline_beyond_period_rejected() {
        let err = TaskGraphBuilder::new("a", 100.0, 200.0).build().unwrap_err();
        assert!(err.to_string().contains("deadline"));
    }

    #[test]
    fn task_without_wcet_rejected() {
        let err = TaskGraphBuilder::new("a", 100.0, 100.0).task("t1", std::iter::empty()).build().unwrap_err();
        assert!(err.to_string().contains("wcet"));
    }
}
