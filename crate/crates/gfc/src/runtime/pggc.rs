//! The standard program for computing a global function: exchange views
//! round by round until the view pins down the value, then tell the
//! neighbours once and stop.

use std::collections::{BTreeSet, HashMap};
use std::sync::Arc;

use super::view::{FullInfoAgent, KnowledgeFragment, ViewMsg};
use super::{Accept, AgentContext, Message, Outgoing, Program, Protocol};
use crate::network::{FunctionError, GlobalFunction, NetworkFamily, Value};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum PgGcMsg {
    Info(ViewMsg),
    /// The sender knows the value; sent at most once per link.
    Final(Value),
}

impl Message for PgGcMsg {
    fn kind(&self) -> &'static str {
        match self {
            PgGcMsg::Info(_) => "info",
            PgGcMsg::Final(_) => "final",
        }
    }

    fn size(&self) -> usize {
        match self {
            PgGcMsg::Info(m) => m.size(),
            PgGcMsg::Final(_) => 1,
        }
    }
}

/// Values of `f` consistent with each view, over the whole family.
#[derive(Debug)]
struct Table {
    /// Views stop telling members apart beyond this depth.
    depth: u32,
    values: HashMap<KnowledgeFragment, BTreeSet<Value>>,
}

impl Table {
    fn build(family: &NetworkFamily, f: &GlobalFunction) -> Result<Table, FunctionError> {
        let members = family.members();
        let fvals = members.iter().map(|n| f.eval(n)).collect::<Result<Vec<Value>, _>>()?;
        let total: usize = members.iter().map(|n| n.len()).sum();
        let mut values: HashMap<KnowledgeFragment, BTreeSet<Value>> = HashMap::new();
        let mut prev_classes = 0;
        let mut depth = 0;
        loop {
            let mut level = BTreeSet::new();
            for (m, net) in members.iter().enumerate() {
                let views = &KnowledgeFragment::of_network(net, depth as usize)[depth as usize];
                for &v in views {
                    level.insert(v);
                    values.entry(v).or_default().insert(fvals[m].clone());
                }
            }
            // Distinct depth-d views are exactly the classes of the depth-d
            // equivalence, which can only split; once the count holds still
            // (or hits the number of agents) it never moves again.
            if level.len() == prev_classes || level.len() == total {
                return Ok(Table { depth, values });
            }
            prev_classes = level.len();
            depth += 1;
        }
    }

    fn lookup(&self, view: KnowledgeFragment) -> Option<Value> {
        let cut = view.truncate(self.depth.min(view.depth()));
        match self.values.get(&cut) {
            Some(vals) if vals.len() == 1 => vals.iter().next().cloned(),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PgGc {
    table: Arc<Table>,
    function: String,
    terminating: bool,
}

/// The terminating program for `f` over `family`.
pub fn pg_gc(family: &NetworkFamily, f: &GlobalFunction) -> Result<PgGc, FunctionError> {
    Ok(PgGc { table: Arc::new(Table::build(family, f)?), function: f.name().to_string(), terminating: true })
}

impl PgGc {
    /// The unmodified program: agents keep exchanging views after they know
    /// the value, so runs only end on the step budget.
    pub fn non_terminating(mut self) -> PgGc {
        self.terminating = false;
        self
    }

    /// Depth after which deeper views carry no more distinguishing power.
    pub fn horizon(&self) -> u32 {
        self.table.depth
    }
}

impl Protocol for PgGc {
    type Program = PgGcAgent;

    fn name(&self) -> String {
        format!("pg_gc({})", self.function)
    }

    fn spawn(&self, ctx: &AgentContext) -> PgGcAgent {
        PgGcAgent {
            inner: FullInfoAgent::new(ctx, None),
            table: self.table.clone(),
            terminating: self.terminating,
            known: None,
            done: false,
            out_ports: ctx.out_ports.len(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct PgGcAgent {
    inner: FullInfoAgent,
    table: Arc<Table>,
    terminating: bool,
    known: Option<Value>,
    done: bool,
    out_ports: usize,
}

impl PgGcAgent {
    pub fn view(&self) -> KnowledgeFragment {
        self.inner.view()
    }

    pub fn rounds(&self) -> usize {
        self.inner.completed()
    }

    fn finish(&mut self, v: Value) -> Vec<Outgoing<PgGcMsg>> {
        self.known = Some(v.clone());
        if !self.terminating {
            return Vec::new();
        }
        self.done = true;
        (0..self.out_ports).map(|p| Outgoing::new(p, PgGcMsg::Final(v.clone()))).collect()
    }

    /// Completes whatever rounds are ready, stopping as soon as the view
    /// determines the value.
    fn advance(&mut self) -> Vec<Outgoing<PgGcMsg>> {
        let table = self.table.clone();
        let known = &mut self.known;
        let terminating = self.terminating;
        let (sends, _) = self.inner.advance(|a| {
            if known.is_none() {
                *known = table.lookup(a.view());
            }
            !(terminating && known.is_some())
        });
        let mut out: Vec<_> = sends.into_iter().map(|o| Outgoing::new(o.port, PgGcMsg::Info(o.msg))).collect();
        if self.terminating {
            if let Some(v) = self.known.clone() {
                out.extend(self.finish(v));
            }
        }
        out
    }
}

impl Program for PgGcAgent {
    type Msg = PgGcMsg;

    fn start(&mut self) -> Vec<Outgoing<PgGcMsg>> {
        if let Some(v) = self.table.lookup(self.inner.view()) {
            if self.terminating {
                return self.finish(v);
            }
            self.known = Some(v);
        }
        let mut sends: Vec<_> =
            self.inner.broadcast().into_iter().map(|o| Outgoing::new(o.port, PgGcMsg::Info(o.msg))).collect();
        sends.extend(self.advance());
        sends
    }

    fn accepts(&self) -> Accept {
        if self.done {
            Accept::Nothing
        } else {
            Accept::Any
        }
    }

    fn on_message(&mut self, port: usize, msg: PgGcMsg) -> Vec<Outgoing<PgGcMsg>> {
        match msg {
            PgGcMsg::Info(m) => {
                self.inner.store(port, m);
                self.advance()
            }
            PgGcMsg::Final(v) => {
                if self.known.is_none() || self.terminating {
                    self.finish(v)
                } else {
                    Vec::new()
                }
            }
        }
    }

    fn decided(&self) -> Option<Value> {
        self.known.clone()
    }
}
