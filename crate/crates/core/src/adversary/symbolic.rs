//! Bounded Dolev-Yao search over the login roles.
//!
//! Cryptography is perfect: a hash reveals nothing, a signcrypted term opens
//! only with the recipient's private key, and nothing is forged without the
//! sender's one. The attacker owns the network, plays the agent `E` and
//! knows every agent's public key.
//!
//! The search is breadth-first over interleavings of a bounded number of
//! role instances. Sends, fresh values and events run as soon as a thread
//! reaches them; only receives branch, over every instantiation the
//! attacker can derive. Variables are typed: agent variables bind agent
//! names and nonce variables bind nonces, mirroring the fixed-width wire
//! fields of the concrete protocol.

use alloc::boxed::Box;
use alloc::collections::{BTreeMap, BTreeSet, VecDeque};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SymTerm {
    Atom { name: String, public: bool },
    Pair(Box<SymTerm>, Box<SymTerm>),
    Hash(Box<SymTerm>),
    KeyedHash(Box<SymTerm>, Box<SymTerm>),
    /// Signcryption of the last term from the holder of the first key to
    /// the owner of the second.
    Sc(Box<SymTerm>, Box<SymTerm>, Box<SymTerm>),
    Pk(String),
    Sk(String),
}

impl SymTerm {
    pub fn atom(name: impl Into<String>, public: bool) -> Self {
        SymTerm::Atom { name: name.into(), public }
    }
    pub fn pair(a: SymTerm, b: SymTerm) -> Self {
        SymTerm::Pair(Box::new(a), Box::new(b))
    }
    pub fn hash(t: SymTerm) -> Self {
        SymTerm::Hash(Box::new(t))
    }
    pub fn keyed_hash(k: SymTerm, t: SymTerm) -> Self {
        SymTerm::KeyedHash(Box::new(k), Box::new(t))
    }
    pub fn sc(sender_key: SymTerm, recipient_key: SymTerm, t: SymTerm) -> Self {
        SymTerm::Sc(Box::new(sender_key), Box::new(recipient_key), Box::new(t))
    }

    fn is_nonce(&self) -> bool {
        matches!(self, SymTerm::Atom { name, .. } if name.contains('#'))
    }
}

impl fmt::Display for SymTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SymTerm::Atom { name, .. } => f.write_str(name),
            SymTerm::Pair(a, b) => write!(f, "({a}, {b})"),
            SymTerm::Hash(t) => write!(f, "h({t})"),
            SymTerm::KeyedHash(k, t) => write!(f, "kh({k}, {t})"),
            SymTerm::Sc(a, b, t) => write!(f, "sc({a}, {b}, {t})"),
            SymTerm::Pk(a) => write!(f, "pk({a})"),
            SymTerm::Sk(a) => write!(f, "sk({a})"),
        }
    }
}

/// Everything the attacker holds, kept closed under decomposition.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord)]
pub struct Knowledge {
    terms: BTreeSet<SymTerm>,
}

impl Knowledge {
    pub fn new(initial: impl IntoIterator<Item = SymTerm>) -> Self {
        let mut k = Knowledge::default();
        for t in initial {
            k.add(t);
        }
        k
    }

    pub fn add(&mut self, t: SymTerm) {
        let mut work = vec![t];
        while let Some(t) = work.pop() {
            if !self.terms.insert(t.clone()) {
                continue;
            }
            match &t {
                SymTerm::Pair(a, b) => {
                    work.push((**a).clone());
                    work.push((**b).clone());
                }
                SymTerm::Sc(_, to, m) => {
                    if let SymTerm::Pk(agent) = &**to {
                        if self.terms.contains(&SymTerm::Sk(agent.clone())) {
                            work.push((**m).clone());
                        }
                    }
                }
                SymTerm::Sk(agent) => {
                    // A new private key opens everything already sent to it.
                    for held in &self.terms {
                        if let SymTerm::Sc(_, to, m) = held {
                            if **to == SymTerm::Pk(agent.clone()) {
                                work.push((**m).clone());
                            }
                        }
                    }
                }
                _ => {}
            }
        }
    }

    pub fn contains(&self, t: &SymTerm) -> bool {
        self.terms.contains(t)
    }

    /// Whether `t` can be built from held terms with at most `depth`
    /// nested constructors.
    pub fn derives(&self, t: &SymTerm, depth: usize) -> bool {
        if self.terms.contains(t) {
            return true;
        }
        match t {
            SymTerm::Atom { public, .. } => *public,
            SymTerm::Pk(_) => true,
            SymTerm::Sk(_) => false,
            _ if depth == 0 => false,
            SymTerm::Pair(a, b) | SymTerm::KeyedHash(a, b) => self.derives(a, depth - 1) && self.derives(b, depth - 1),
            SymTerm::Hash(a) => self.derives(a, depth - 1),
            SymTerm::Sc(k, to, m) => {
                matches!(&**k, SymTerm::Sk(_))
                    && self.derives(k, depth - 1)
                    && self.derives(to, depth - 1)
                    && self.derives(m, depth - 1)
            }
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = &SymTerm> {
        self.terms.iter()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarKind {
    Agent,
    Nonce,
}

/// Role-side term with variables.
#[derive(Debug, Clone)]
pub enum Pat {
    Var(&'static str),
    Pair(Box<Pat>, Box<Pat>),
    Hash(Box<Pat>),
    KeyedHash(Box<Pat>, Box<Pat>),
    Sc(Box<Pat>, Box<Pat>, Box<Pat>),
    Pk(Box<Pat>),
    Sk(Box<Pat>),
    /// A long-term value owned by the agent the inner pattern names, such
    /// as its password or phone number.
    LongTerm(&'static str, Box<Pat>),
}

pub fn var(v: &'static str) -> Pat {
    Pat::Var(v)
}
pub fn pair(a: Pat, b: Pat) -> Pat {
    Pat::Pair(Box::new(a), Box::new(b))
}
pub fn hash(a: Pat) -> Pat {
    Pat::Hash(Box::new(a))
}
pub fn keyed_hash(k: Pat, a: Pat) -> Pat {
    Pat::KeyedHash(Box::new(k), Box::new(a))
}
pub fn sc(from: Pat, to: Pat, m: Pat) -> Pat {
    Pat::Sc(Box::new(from), Box::new(to), Box::new(m))
}
pub fn pk(a: Pat) -> Pat {
    Pat::Pk(Box::new(a))
}
pub fn sk(a: Pat) -> Pat {
    Pat::Sk(Box::new(a))
}
pub fn long_term(base: &'static str, owner: Pat) -> Pat {
    Pat::LongTerm(base, Box::new(owner))
}

#[derive(Debug, Clone)]
pub enum Step {
    Send(Pat),
    Recv(Pat),
    /// Fresh nonce. Public ones (the grid) are known to everybody anyway.
    Fresh { var: &'static str, public: bool },
    /// The user has accepted this value as coming from the bank.
    Running(Pat),
    /// The bank considers the login complete for this value.
    Commit(Pat),
}

#[derive(Debug, Clone)]
pub struct Role {
    pub name: &'static str,
    pub vars: Vec<(&'static str, VarKind)>,
    /// Variables fixed when the thread starts, naming agents.
    pub params: Vec<(&'static str, &'static str)>,
    pub steps: Vec<Step>,
    /// Binding name of the peer whose secrets the claims protect.
    pub peer_var: &'static str,
}

#[derive(Debug, Clone)]
pub struct Model {
    pub name: &'static str,
    pub user: Role,
    pub server: Role,
    /// Long-term bases that are public even for honest agents.
    pub public_long_term: Vec<&'static str>,
    /// Extra initial attacker knowledge (for compromise experiments).
    pub leaked: Vec<SymTerm>,
}

pub const USER: &str = "U";
pub const BANK: &str = "S";
pub const ATTACKER: &str = "E";
const AGENTS: [&str; 3] = [USER, BANK, ATTACKER];

fn user_role(challenge: Pat) -> Role {
    Role {
        name: "user",
        vars: vec![("G", VarKind::Nonce), ("X", VarKind::Nonce)],
        params: vec![("U", USER), ("S", BANK)],
        steps: vec![
            Step::Send(var("U")),
            Step::Recv(var("G")),
            Step::Send(keyed_hash(long_term("b", var("U")), var("G"))),
            Step::Recv(challenge),
            Step::Running(var("X")),
            Step::Send(hash(pair(var("X"), long_term("P", var("U"))))),
        ],
        peer_var: "U",
    }
}

fn server_role(challenge: Pat) -> Role {
    Role {
        name: "server",
        vars: vec![("U", VarKind::Agent)],
        params: vec![("S", BANK)],
        steps: vec![
            Step::Recv(var("U")),
            Step::Fresh { var: "G", public: true },
            Step::Send(var("G")),
            Step::Recv(keyed_hash(long_term("b", var("U")), var("G"))),
            Step::Fresh { var: "Rc", public: false },
            Step::Send(challenge),
            Step::Recv(hash(pair(var("Rc"), long_term("P", var("U"))))),
            Step::Commit(var("Rc")),
        ],
        peer_var: "U",
    }
}

impl Model {
    /// The login as built: `R_c` travels signcrypted from the bank to the user.
    pub fn smbank() -> Self {
        Model {
            name: "smbank",
            user: user_role(sc(sk(var("S")), pk(var("U")), var("X"))),
            server: server_role(sc(sk(var("S")), pk(var("U")), var("Rc"))),
            public_long_term: Vec::new(),
            leaked: Vec::new(),
        }
    }

    /// Same roles with the phone number treated as public.
    pub fn smbank_public_phone() -> Self {
        Model { name: "smbank-public-phone", public_long_term: vec!["P"], ..Self::smbank() }
    }

    /// An SMS one-time-code style variant: `R_c` is sent as it is.
    pub fn sms_otp_variant() -> Self {
        Model {
            name: "sms-otp-variant",
            user: user_role(var("X")),
            server: server_role(var("Rc")),
            public_long_term: Vec::new(),
            leaked: Vec::new(),
        }
    }

    fn long_term_atom(&self, base: &str, owner: &str) -> SymTerm {
        let public = owner == ATTACKER || self.public_long_term.contains(&base);
        SymTerm::atom(format!("{base}_{owner}"), public)
    }

    fn initial_knowledge(&self) -> Knowledge {
        let mut init: Vec<SymTerm> = AGENTS.iter().map(|a| SymTerm::atom(*a, true)).collect();
        init.push(SymTerm::Sk(ATTACKER.into()));
        init.push(SymTerm::atom("nE#", true));
        for base in ["b", "P"] {
            init.push(self.long_term_atom(base, ATTACKER));
        }
        init.extend(self.leaked.iter().cloned());
        Knowledge::new(init)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SecretTerm {
    ChallengeNonce,
    Password,
    /// `R_r` before the user has sent it.
    ResponseNonce,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Claim {
    Secret(SecretTerm),
    /// Every bank commit on `R_c` for an honest user is matched by that
    /// user having accepted the same `R_c` from the bank.
    Agreement,
}

impl Claim {
    pub const ALL: [Claim; 4] = [
        Claim::Secret(SecretTerm::ChallengeNonce),
        Claim::Secret(SecretTerm::Password),
        Claim::Secret(SecretTerm::ResponseNonce),
        Claim::Agreement,
    ];
}

impl fmt::Display for Claim {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Claim::Secret(SecretTerm::ChallengeNonce) => "Secret(R_c)",
            Claim::Secret(SecretTerm::Password) => "Secret(b)",
            Claim::Secret(SecretTerm::ResponseNonce) => "Secret(R_r pre-use)",
            Claim::Agreement => "Agreement(R_c)",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Bounds {
    /// Instances of each role.
    pub sessions: usize,
    /// Maximum constructor nesting when the attacker builds a term.
    pub depth: usize,
    /// Search budget; running out gives an inconclusive verdict.
    pub max_states: usize,
}

impl Default for Bounds {
    fn default() -> Self {
        Bounds { sessions: 2, depth: 6, max_states: 2_000_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum TraceStep {
    Send { thread: usize, role: &'static str, term: SymTerm },
    Recv { thread: usize, role: &'static str, term: SymTerm },
    Running { thread: usize, term: SymTerm },
    Commit { thread: usize, term: SymTerm },
    /// The attacker derives the secret.
    Leak { term: SymTerm },
}

impl fmt::Display for TraceStep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TraceStep::Send { thread, role, term } => write!(f, "#{thread} {role} sends {term}"),
            TraceStep::Recv { thread, role, term } => write!(f, "#{thread} {role} receives {term}"),
            TraceStep::Running { thread, term } => write!(f, "#{thread} user accepts {term}"),
            TraceStep::Commit { thread, term } => write!(f, "#{thread} server commits {term}"),
            TraceStep::Leak { term } => write!(f, "attacker derives {term}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Status {
    NoAttackWithinBounds,
    AttackFound(Vec<TraceStep>),
    Inconclusive,
}

impl Status {
    pub fn label(&self) -> &'static str {
        match self {
            Status::NoAttackWithinBounds => "No attacks within bounds",
            Status::AttackFound(_) => "Attack found",
            Status::Inconclusive => "Inconclusive",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CheckerVerdict {
    pub model: &'static str,
    pub claim: Claim,
    pub status: Status,
    pub bounds: Bounds,
    pub states: usize,
}

impl fmt::Display for CheckerVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {}: {} (sessions={}, depth={}, states={})",
            self.model,
            self.claim,
            self.status.label(),
            self.bounds.sessions,
            self.bounds.depth,
            self.states
        )?;
        if let Status::AttackFound(trace) = &self.status {
            for (i, step) in trace.iter().enumerate() {
                write!(f, "\n  {}. {step}", i + 1)?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
struct Thread {
    is_user: bool,
    pc: usize,
    binds: BTreeMap<&'static str, SymTerm>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
struct Key {
    threads: Vec<Thread>,
    knowledge: Knowledge,
    running: BTreeSet<(String, SymTerm)>,
    released: BTreeSet<SymTerm>,
}

#[derive(Debug, Clone)]
struct State {
    key: Key,
    trace: Vec<TraceStep>,
}

struct Checker<'m> {
    model: &'m Model,
    bounds: Bounds,
    found: BTreeMap<Claim, Vec<TraceStep>>,
}

fn agent_name(t: &SymTerm) -> Option<&str> {
    match t {
        SymTerm::Atom { name, .. } if AGENTS.contains(&name.as_str()) => Some(name),
        _ => None,
    }
}

impl<'m> Checker<'m> {
    fn role(&self, t: &Thread) -> &'m Role {
        if t.is_user {
            &self.model.user
        } else {
            &self.model.server
        }
    }

    fn inst(&self, p: &Pat, binds: &BTreeMap<&'static str, SymTerm>) -> Option<SymTerm> {
        Some(match p {
            Pat::Var(v) => binds.get(v)?.clone(),
            Pat::Pair(a, b) => SymTerm::pair(self.inst(a, binds)?, self.inst(b, binds)?),
            Pat::Hash(a) => SymTerm::hash(self.inst(a, binds)?),
            Pat::KeyedHash(k, a) => SymTerm::keyed_hash(self.inst(k, binds)?, self.inst(a, binds)?),
            Pat::Sc(k, to, m) => SymTerm::sc(self.inst(k, binds)?, self.inst(to, binds)?, self.inst(m, binds)?),
            Pat::Pk(a) => SymTerm::Pk(agent_name(&self.inst(a, binds)?)?.into()),
            Pat::Sk(a) => SymTerm::Sk(agent_name(&self.inst(a, binds)?)?.into()),
            Pat::LongTerm(base, owner) => self.model.long_term_atom(base, agent_name(&self.inst(owner, binds)?)?),
        })
    }

    fn unbound(p: &Pat, binds: &BTreeMap<&'static str, SymTerm>, out: &mut Vec<&'static str>) {
        match p {
            Pat::Var(v) => {
                if !binds.contains_key(v) && !out.contains(v) {
                    out.push(v);
                }
            }
            Pat::Pair(a, b) | Pat::KeyedHash(a, b) => {
                Self::unbound(a, binds, out);
                Self::unbound(b, binds, out);
            }
            Pat::Sc(a, b, c) => {
                Self::unbound(a, binds, out);
                Self::unbound(b, binds, out);
                Self::unbound(c, binds, out);
            }
            Pat::Hash(a) | Pat::Pk(a) | Pat::Sk(a) | Pat::LongTerm(_, a) => Self::unbound(a, binds, out),
        }
    }

    fn honest(agent: &SymTerm) -> bool {
        agent_name(agent).is_some_and(|a| a != ATTACKER)
    }

    fn initial(&mut self) -> Option<State> {
        let mut threads = Vec::new();
        for is_user in [true, false] {
            for _ in 0..self.bounds.sessions {
                let role = if is_user { &self.model.user } else { &self.model.server };
                let binds = role.params.iter().map(|(v, a)| (*v, SymTerm::atom(*a, true))).collect();
                threads.push(Thread { is_user, pc: 0, binds });
            }
        }
        let mut state = State {
            key: Key {
                threads,
                knowledge: self.model.initial_knowledge(),
                running: BTreeSet::new(),
                released: BTreeSet::new(),
            },
            trace: Vec::new(),
        };
        for i in 0..state.key.threads.len() {
            self.run_eager(&mut state, i);
        }
        self.check_secrets(&state);
        Some(state)
    }

    /// Executes thread `i` until its next receive or its end.
    fn run_eager(&mut self, state: &mut State, i: usize) {
        loop {
            let thread = &state.key.threads[i];
            let role = self.role(thread);
            let Some(step) = role.steps.get(thread.pc) else { return };
            let binds = thread.binds.clone();
            match step {
                Step::Recv(_) => return,
                Step::Fresh { var, public } => {
                    let atom = SymTerm::atom(format!("{var}#{i}"), *public);
                    state.key.threads[i].binds.insert(var, atom);
                }
                Step::Send(p) => {
                    let term = self.inst(p, &binds).expect("send is fully bound");
                    if thread.is_user {
                        state.key.released.insert(term.clone());
                    }
                    state.key.knowledge.add(term.clone());
                    state.trace.push(TraceStep::Send { thread: i, role: role.name, term });
                }
                Step::Running(p) => {
                    let term = self.inst(p, &binds).expect("bound");
                    let peer = agent_name(&binds[role.peer_var]).expect("agent").to_string();
                    state.key.running.insert((peer, term.clone()));
                    state.trace.push(TraceStep::Running { thread: i, term });
                }
                Step::Commit(p) => {
                    let term = self.inst(p, &binds).expect("bound");
                    state.trace.push(TraceStep::Commit { thread: i, term: term.clone() });
                    let peer = &binds[role.peer_var];
                    if Self::honest(peer) {
                        let peer = agent_name(peer).expect("agent").to_string();
                        if !state.key.running.contains(&(peer, term)) {
                            self.record(Claim::Agreement, state.trace.clone());
                        }
                    }
                }
            }
            state.key.threads[i].pc += 1;
            self.check_secrets(state);
        }
    }

    fn record(&mut self, claim: Claim, trace: Vec<TraceStep>) {
        self.found.entry(claim).or_insert(trace);
    }

    fn check_secrets(&mut self, state: &State) {
        let k = &state.key.knowledge;
        let b_user = self.model.long_term_atom("b", USER);
        if k.derives(&b_user, self.bounds.depth) {
            self.leak(Claim::Secret(SecretTerm::Password), state, b_user);
        }
        for t in state.key.threads.iter().filter(|t| !t.is_user) {
            let (Some(rc), Some(peer)) = (t.binds.get("Rc"), t.binds.get("U")) else { continue };
            if !Self::honest(peer) {
                continue;
            }
            if k.derives(rc, self.bounds.depth) {
                self.leak(Claim::Secret(SecretTerm::ChallengeNonce), state, rc.clone());
            }
            let phone = self.model.long_term_atom("P", agent_name(peer).expect("agent"));
            let rr = SymTerm::hash(SymTerm::pair(rc.clone(), phone));
            if !state.key.released.contains(&rr) && k.derives(&rr, self.bounds.depth) {
                self.leak(Claim::Secret(SecretTerm::ResponseNonce), state, rr);
            }
        }
    }

    fn leak(&mut self, claim: Claim, state: &State, term: SymTerm) {
        if !self.found.contains_key(&claim) {
            let mut trace = state.trace.clone();
            trace.push(TraceStep::Leak { term });
            self.found.insert(claim, trace);
        }
    }

    fn candidates(&self, kind: VarKind, k: &Knowledge) -> Vec<SymTerm> {
        match kind {
            VarKind::Agent => AGENTS.iter().map(|a| SymTerm::atom(*a, true)).collect(),
            VarKind::Nonce => k.terms().filter(|t| t.is_nonce()).cloned().collect(),
        }
    }

    /// Every way thread `i` can take its pending receive.
    fn receives(&self, state: &State, i: usize) -> Vec<(BTreeMap<&'static str, SymTerm>, SymTerm)> {
        let thread = &state.key.threads[i];
        let role = self.role(thread);
        let Some(Step::Recv(p)) = role.steps.get(thread.pc) else { return Vec::new() };
        let mut vars = Vec::new();
        Self::unbound(p, &thread.binds, &mut vars);
        let mut assignments = vec![thread.binds.clone()];
        for v in vars {
            let kind = role.vars.iter().find(|(n, _)| *n == v).map(|(_, k)| *k).expect("declared variable");
            let cands = self.candidates(kind, &state.key.knowledge);
            assignments = assignments
                .into_iter()
                .flat_map(|b| {
                    cands.iter().map(move |c| {
                        let mut b = b.clone();
                        b.insert(v, c.clone());
                        b
                    })
                })
                .collect();
        }
        assignments
            .into_iter()
            .filter_map(|b| {
                let term = self.inst(p, &b)?;
                state.key.knowledge.derives(&term, self.bounds.depth).then_some((b, term))
            })
            .collect()
    }

    fn search(&mut self) -> (usize, bool) {
        let Some(init) = self.initial() else { return (0, true) };
        let mut seen = BTreeSet::new();
        seen.insert(init.key.clone());
        let mut queue = VecDeque::from([init]);
        let mut explored = 0;
        while let Some(state) = queue.pop_front() {
            explored += 1;
            if explored > self.bounds.max_states {
                return (explored - 1, false);
            }
            if self.found.len() == Claim::ALL.len() {
                continue;
            }
            for i in 0..state.key.threads.len() {
                for (binds, term) in self.receives(&state, i) {
                    let mut next = state.clone();
                    let role = self.role(&next.key.threads[i]).name;
                    next.key.threads[i].binds = binds;
                    next.key.threads[i].pc += 1;
                    next.trace.push(TraceStep::Recv { thread: i, role, term });
                    self.run_eager(&mut next, i);
                    if seen.insert(next.key.clone()) {
                        queue.push_back(next);
                    }
                }
            }
        }
        (explored, true)
    }
}

/// Runs the bounded search and returns one verdict per claim.
pub fn symbolic_check(model: &Model, bounds: Bounds) -> Vec<CheckerVerdict> {
    let mut checker = Checker { model, bounds, found: BTreeMap::new() };
    let (states, exhausted) = checker.search();
    Claim::ALL
        .iter()
        .map(|&claim| {
            let status = match checker.found.remove(&claim) {
                Some(trace) => Status::AttackFound(trace),
                None if exhausted => Status::NoAttackWithinBounds,
                None => Status::Inconclusive,
            };
            CheckerVerdict { model: model.name, claim, status, bounds, states }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ReplayError {
    #[error("step {0}: attacker cannot derive the received term")]
    NotDerivable(usize),
    #[error("step {0}: attacker cannot derive the leaked term")]
    NoLeak(usize),
    #[error("trace is empty")]
    Empty,
}

/// Re-derives a trace from the model's initial knowledge: each send adds
/// to what the attacker holds, and each receive and leak must be derivable
/// at that point.
pub fn replay(model: &Model, trace: &[TraceStep], depth: usize) -> Result<Knowledge, ReplayError> {
    if trace.is_empty() {
        return Err(ReplayError::Empty);
    }
    let mut k = model.initial_knowledge();
    for (i, step) in trace.iter().enumerate() {
        match step {
            TraceStep::Send { term, .. } => k.add(term.clone()),
            TraceStep::Recv { term, .. } if !k.derives(term, depth) => return Err(ReplayError::NotDerivable(i)),
            TraceStep::Leak { term } if !k.derives(term, depth) => return Err(ReplayError::NoLeak(i)),
            _ => {}
        }
    }
    Ok(k)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(n: &str) -> SymTerm {
        SymTerm::atom(n, false)
    }

    #[test]
    fn analysis_opens_with_private_key_only() {
        let m = t("m#1");
        let msg = SymTerm::sc(SymTerm::Sk("S".into()), SymTerm::Pk("U".into()), m.clone());
        let mut k = Knowledge::new([msg.clone()]);
        assert!(!k.contains(&m));
        k.add(SymTerm::Sk("U".into()));
        assert!(k.contains(&m));
        let k = Knowledge::new([SymTerm::Sk("U".into()), msg]);
        assert!(k.contains(&m));
    }

    #[test]
    fn pairs_split_hashes_do_not() {
        let k = Knowledge::new([SymTerm::pair(t("a"), SymTerm::hash(t("b")))]);
        assert!(k.contains(&t("a")));
        assert!(!k.derives(&t("b"), 6));
        assert!(k.derives(&SymTerm::hash(SymTerm::pair(t("a"), t("a"))), 6));
    }

    #[test]
    fn synthesis_respects_depth_and_keys() {
        let k = Knowledge::new([t("a"), SymTerm::Sk("E".into())]);
        let mut nested = t("a");
        for _ in 0..6 {
            nested = SymTerm::hash(nested);
        }
        assert!(k.derives(&nested, 6));
        assert!(!k.derives(&SymTerm::hash(nested), 6));
        let forged = SymTerm::sc(SymTerm::Sk("S".into()), SymTerm::Pk("U".into()), t("a"));
        assert!(!k.derives(&forged, 6));
        let own = SymTerm::sc(SymTerm::Sk("E".into()), SymTerm::Pk("U".into()), t("a"));
        assert!(k.derives(&own, 6));
    }

    fn small() -> Bounds {
        Bounds { sessions: 1, ..Bounds::default() }
    }

    #[test]
    fn one_session_holds() {
        for v in symbolic_check(&Model::smbank(), small()) {
            assert_eq!(v.status, Status::NoAttackWithinBounds, "{v}");
        }
    }

    #[test]
    fn canary_leaks_by_eavesdropping() {
        let verdicts = symbolic_check(&Model::sms_otp_variant(), small());
        let Status::AttackFound(trace) = &verdicts[0].status else { panic!("{}", verdicts[0]) };
        assert!(replay(&Model::sms_otp_variant(), trace, 6).is_ok());
        // Pure eavesdropping: every received term was sent verbatim before.
        let mut sent = Vec::new();
        for step in trace {
            match step {
                TraceStep::Send { term, .. } => sent.push(term.clone()),
                TraceStep::Recv { term, .. } => assert!(sent.contains(term), "{step}"),
                _ => {}
            }
        }
        assert!(matches!(trace.last(), Some(TraceStep::Leak { term }) if term.to_string().starts_with("Rc#")));
        // The other claims still hold in the variant.
        for v in &verdicts[1..] {
            assert_eq!(v.status, Status::NoAttackWithinBounds, "{v}");
        }
    }

    #[test]
    fn compromised_user_key_breaks_challenge_secrecy() {
        let model = Model { name: "leaked-sk", leaked: vec![SymTerm::Sk(USER.into())], ..Model::smbank() };
        let verdicts = symbolic_check(&model, small());
        let Status::AttackFound(trace) = &verdicts[0].status else { panic!("{}", verdicts[0]) };
        assert!(replay(&model, trace, 6).is_ok());
    }

    #[test]
    fn leaked_password_only_breaks_its_own_claim() {
        let model = Model { name: "leaked-b", leaked: vec![t("b_U")], ..Model::smbank() };
        let verdicts = symbolic_check(&model, small());
        assert!(matches!(verdicts[1].status, Status::AttackFound(_)));
        for i in [0, 2, 3] {
            assert_eq!(verdicts[i].status, Status::NoAttackWithinBounds, "{}", verdicts[i]);
        }
    }

    #[test]
    fn forged_trace_fails_replay() {
        let model = Model::smbank();
        let bogus = [TraceStep::Recv {
            thread: 0,
            role: "user",
            term: SymTerm::sc(SymTerm::Sk("S".into()), SymTerm::Pk("U".into()), t("Rc#2")),
        }];
        assert_eq!(replay(&model, &bogus, 6).unwrap_err(), ReplayError::NotDerivable(0));
        assert_eq!(replay(&model, &[], 6).unwrap_err(), ReplayError::Empty);
    }

    #[test]
    fn budget_exhaustion_is_inconclusive() {
        let verdicts = symbolic_check(&Model::smbank(), Bounds { max_states: 3, ..Bounds::default() });
        assert!(verdicts.iter().all(|v| v.status == Status::Inconclusive));
    }

    #[test]
    fn verdict_line() {
        let v = CheckerVerdict {
            model: "smbank",
            claim: Claim::Agreement,
            status: Status::NoAttackWithinBounds,
            bounds: Bounds::default(),
            states: 10,
        };
        assert_eq!(v.to_string(), "smbank Agreement(R_c): No attacks within bounds (sessions=2, depth=6, states=10)");
    }
}
