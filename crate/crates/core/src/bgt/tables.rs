//! Lookup tables of schedules for relaxed folded instances.
//!
//! A key is a sorted list of relaxed periods. Only keys not dominated by an
//! already stored key are solved: key `E` dominates `Q` when `E` has at least
//! as many jobs and `E[i] ≤ Q[i]` position by position, so a schedule for `E`
//! restricted to its first `|Q|` jobs serves `Q`.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use num_integer::Integer;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::BgtError;
use crate::instances::TaskPeriods;
use crate::schedule::{verify_packing, CyclicSchedule, Slot};
use crate::solvers::{solve, Outcome, SolverConfig};

pub const TABLE_FORMAT: &str = "pinwheel-bgt-tables";
pub const TABLE_VERSION: u32 = 1;
pub const TABLE_FILE: &str = "bgt-tables.json";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TableId {
    T1,
    T2,
    T3,
}

impl TableId {
    pub fn theta(self) -> u64 {
        match self {
            TableId::T1 => 18,
            TableId::T2 => 28,
            TableId::T3 => 14,
        }
    }

    /// The period every key of the table starts with, if any.
    pub fn base(self) -> Option<u64> {
        match self {
            TableId::T3 => None,
            _ => Some(3),
        }
    }
}

impl std::fmt::Display for TableId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{self:?}")
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Lookup {
    Found(CyclicSchedule),
    /// The key was solved during the build and has no schedule.
    Unschedulable,
    Absent,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "RawTable", try_from = "RawTable")]
pub struct ScheduleTable {
    pub id: TableId,
    /// Number of keys in the reachable family, stored or dominated.
    pub reachable: u64,
    pub entries: BTreeMap<Vec<u64>, CyclicSchedule>,
    /// Reachable keys that are unschedulable and not dominated by an entry.
    pub unschedulable: BTreeSet<Vec<u64>>,
}

impl ScheduleTable {
    pub fn lookup(&self, key: &[u64]) -> Lookup {
        if let Some(s) = self.entries.get(key) {
            return Lookup::Found(s.clone());
        }
        if self.unschedulable.contains(key) {
            return Lookup::Unschedulable;
        }
        let hit = self
            .entries
            .iter()
            .filter(|(e, _)| e.len() >= key.len() && e.iter().zip(key).all(|(x, q)| x <= q))
            .min_by_key(|(e, s)| (e.len(), s.prefix.len() + s.cycle.len()));
        match hit {
            Some((_, s)) => Lookup::Found(restrict(s, key.len())),
            None => Lookup::Absent,
        }
    }

    /// Re-verifies every entry against its key.
    pub fn verify(&self) -> Result<bool, BgtError> {
        for (key, s) in &self.entries {
            if !verify_packing(&TaskPeriods::packing(key), s)? {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

/// Keeps jobs below `n`; the rest become idle days.
fn restrict(s: &CyclicSchedule, n: usize) -> CyclicSchedule {
    let keep = |v: &Vec<Slot>| v.iter().map(|x| x.filter(|&j| j < n)).collect();
    CyclicSchedule { prefix: keep(&s.prefix), cycle: keep(&s.cycle) }
}

const SLOT_CHARS: &[u8] = b"0123456789abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ";
const IDLE_CHAR: char = '.';

fn encode_slots(v: &[Slot]) -> String {
    v.iter().map(|x| x.map_or(IDLE_CHAR, |j| SLOT_CHARS[j] as char)).collect()
}

fn decode_slots(s: &str) -> Result<Vec<Slot>, String> {
    s.chars()
        .map(|ch| {
            if ch == IDLE_CHAR {
                Ok(None)
            } else {
                SLOT_CHARS.iter().position(|&c| c as char == ch).map(Some).ok_or_else(|| format!("bad slot {ch:?}"))
            }
        })
        .collect()
}

fn key_string(k: &[u64]) -> String {
    k.iter().map(u64::to_string).collect::<Vec<_>>().join(",")
}

fn parse_key(s: &str) -> Result<Vec<u64>, String> {
    s.split(',').map(|x| x.parse().map_err(|_| format!("bad key {s:?}"))).collect()
}

/// Compact form: schedules as strings, one character per day.
#[derive(Serialize, Deserialize)]
struct RawTable {
    id: TableId,
    reachable: u64,
    entries: Vec<RawEntry>,
    unschedulable: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct RawEntry {
    key: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    prefix: String,
    cycle: String,
}

impl From<ScheduleTable> for RawTable {
    fn from(t: ScheduleTable) -> Self {
        RawTable {
            id: t.id,
            reachable: t.reachable,
            entries: t
                .entries
                .iter()
                .map(|(k, s)| RawEntry { key: key_string(k), prefix: encode_slots(&s.prefix), cycle: encode_slots(&s.cycle) })
                .collect(),
            unschedulable: t.unschedulable.iter().map(|k| key_string(k)).collect(),
        }
    }
}

impl TryFrom<RawTable> for ScheduleTable {
    type Error = String;

    fn try_from(r: RawTable) -> Result<Self, String> {
        let mut entries = BTreeMap::new();
        for e in r.entries {
            let s = CyclicSchedule { prefix: decode_slots(&e.prefix)?, cycle: decode_slots(&e.cycle)? };
            if s.cycle.is_empty() {
                return Err(format!("empty cycle for key {}", e.key));
            }
            entries.insert(parse_key(&e.key)?, s);
        }
        let unschedulable = r.unschedulable.iter().map(|k| parse_key(k)).collect::<Result<_, _>>()?;
        Ok(ScheduleTable { id: r.id, reachable: r.reachable, entries, unschedulable })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableConfig {
    pub state_budget: u64,
    /// Worker threads for the build; `None` uses every core. Does not
    /// affect the output.
    #[serde(skip)]
    pub workers: Option<usize>,
}

impl Default for TableConfig {
    fn default() -> Self {
        TableConfig { state_budget: SolverConfig::from_env().state_budget, workers: None }
    }
}

impl TableConfig {
    pub fn fingerprint(&self) -> String {
        let canon = serde_json::json!({
            "format": TABLE_FORMAT,
            "version": TABLE_VERSION,
            "state_budget": self.state_budget,
            "thetas": [TableId::T1.theta(), TableId::T2.theta(), TableId::T3.theta()],
        });
        hex::encode(Sha256::digest(canon.to_string().as_bytes()))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tables {
    pub format: String,
    pub version: u32,
    pub config: TableConfig,
    pub fingerprint: String,
    pub t1: ScheduleTable,
    pub t2: ScheduleTable,
    pub t3: ScheduleTable,
}

impl Tables {
    pub fn table(&self, id: TableId) -> &ScheduleTable {
        match id {
            TableId::T1 => &self.t1,
            TableId::T2 => &self.t2,
            TableId::T3 => &self.t3,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("tables serialize")
    }

    /// Writes `dir/bgt-tables.json`.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<std::path::PathBuf, BgtError> {
        let dir = dir.as_ref();
        let path = dir.join(TABLE_FILE);
        let io = |source| BgtError::Io { path: path.display().to_string(), source };
        std::fs::create_dir_all(dir).map_err(io)?;
        std::fs::write(&path, self.to_json()).map_err(io)?;
        Ok(path)
    }

    /// Reads `dir/bgt-tables.json` (or the file itself when given one) and
    /// checks format, fingerprint and every entry.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, BgtError> {
        let mut path = path.as_ref().to_path_buf();
        if path.is_dir() {
            path = path.join(TABLE_FILE);
        }
        let shown = path.display().to_string();
        let text = std::fs::read_to_string(&path).map_err(|source| BgtError::Io { path: shown.clone(), source })?;
        let t: Tables =
            serde_json::from_str(&text).map_err(|e| BgtError::Corrupt { path: shown.clone(), why: e.to_string() })?;
        if t.format != TABLE_FORMAT || t.version != TABLE_VERSION {
            return Err(BgtError::Corrupt { path: shown, why: format!("unsupported format {} v{}", t.format, t.version) });
        }
        if t.fingerprint != t.config.fingerprint() {
            return Err(BgtError::Corrupt { path: shown, why: "fingerprint does not match config".into() });
        }
        for table in [&t.t1, &t.t2, &t.t3] {
            if !table.verify()? {
                return Err(BgtError::Corrupt { path: shown, why: format!("table {} has an invalid schedule", table.id) });
            }
        }
        Ok(t)
    }
}

/// Builds T1 and T3 over their reachable families, then T2 over the keys a
/// T1 miss can fall back to.
pub fn build_tables(cfg: &TableConfig) -> Result<Tables, BgtError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = cfg.workers {
        builder = builder.num_threads(w.max(1));
    }
    let pool = builder.build().map_err(|e| BgtError::Pool(e.to_string()))?;
    let solver = SolverConfig { state_budget: cfg.state_budget };
    let t3 = build_one(TableId::T3, &solver, &pool)?;
    if let Some(k) = t3.unschedulable.iter().next() {
        return Err(BgtError::UnschedulableReachable { table: TableId::T3, key: key_string(k) });
    }
    let t1 = build_one(TableId::T1, &solver, &pool)?;
    let t2 = build_fallback(&t1, &solver, &pool)?;
    if let Some(k) = t2.unschedulable.iter().next() {
        return Err(BgtError::UnschedulableReachable { table: TableId::T2, key: key_string(k) });
    }
    Ok(Tables {
        format: TABLE_FORMAT.into(),
        version: TABLE_VERSION,
        config: *cfg,
        fingerprint: cfg.fingerprint(),
        t1,
        t2,
        t3,
    })
}

/// T2 holds schedules for `relax(pfold_28(A))` whenever `relax(pfold_18(A))`
/// is a T1 miss.
///
/// `pfold_18(A) = pfold_18(pfold_28(A))`, and folding at 18 only pairs the
/// elements in `(18, 28]`: sorted descending, the 2nd, 4th, … are halved and
/// an odd one out is clamped to 18. So each miss is split into elements
/// kept from the θ = 28 fold and elements produced by that pairing, and every
/// relaxed `(18, 28]` sequence producing the latter is tried.
fn build_fallback(t1: &ScheduleTable, solver: &SolverConfig, pool: &rayon::ThreadPool) -> Result<ScheduleTable, BgtError> {
    let dom = Domain::new(TableId::T2);
    let mut keys = BTreeSet::new();
    for miss in &t1.unschedulable {
        let rest = &miss[1..];
        for folded in sub_multisets(rest) {
            let mut kept = rest.to_vec();
            for f in &folded {
                let pos = kept.iter().position(|x| x == f).expect("sub-multiset");
                kept.remove(pos);
            }
            // Halving `y ∈ (18, 28]` relaxes to `⌊r/2⌋` with `r = ⌊9y/7⌋`.
            let (clamped, pairs): (Vec<u64>, Vec<u64>) = folded.iter().partition(|&&c| c == relax_u(18));
            if clamped.len() > 1 || pairs.iter().any(|&c| !(11..=18).contains(&c)) {
                continue;
            }
            let mut pairs = pairs;
            pairs.sort_unstable_by(|a, b| b.cmp(a));
            let mut seqs = Vec::new();
            pair_sources(&pairs, !clamped.is_empty(), relax_u(28), &mut Vec::new(), &mut seqs);
            for seq in seqs {
                let mut key = miss[..1].to_vec();
                key.extend(&kept);
                key.extend(seq);
                key.sort_unstable();
                if dom.pack(&key).is_some_and(|k| dom.reachable(k)) {
                    keys.insert(key);
                }
            }
        }
    }
    let mut table = ScheduleTable { id: TableId::T2, reachable: keys.len() as u64, entries: BTreeMap::new(), unschedulable: BTreeSet::new() };
    let mut order: Vec<Vec<u64>> = keys.into_iter().collect();
    order.sort_by(|a, b| b.len().cmp(&a.len()).then(a.iter().sum::<u64>().cmp(&b.iter().sum())).then(a.cmp(b)));
    for key in order {
        if let Lookup::Found(_) = table.lookup(&key) {
            continue;
        }
        let a = TaskPeriods::packing(&key);
        let (v, _) = pool.install(|| solve(&a, solver))?;
        match v.outcome {
            Outcome::Schedulable(s) => {
                if !verify_packing(&a, &s)? {
                    return Err(BgtError::Unverified(key_string(&key)));
                }
                table.entries.insert(key, s);
            }
            Outcome::Unschedulable => {
                log::warn!("table T2: reachable key {} is unschedulable", key_string(&key));
                table.unschedulable.insert(key);
            }
        }
    }
    log::info!(
        "table T2: {} reachable, {} stored, {} unschedulable",
        table.reachable,
        table.entries.len(),
        table.unschedulable.len()
    );
    Ok(table)
}

/// Distinct sub-multisets of a sorted list.
fn sub_multisets(v: &[u64]) -> Vec<Vec<u64>> {
    let mut out = vec![Vec::new()];
    let mut i = 0;
    while i < v.len() {
        let mut j = i;
        while j < v.len() && v[j] == v[i] {
            j += 1;
        }
        let mut next = Vec::new();
        for s in &out {
            for n in 0..=(j - i) {
                let mut t = s.clone();
                t.extend(std::iter::repeat(v[i]).take(n));
                next.push(t);
            }
        }
        out = next;
        i = j;
    }
    out
}

/// Relaxed `(18, 28]` sequences, descending, whose 2nd, 4th, … elements
/// halve to `pairs` (descending), with one more element when `clamp`.
fn pair_sources(pairs: &[u64], clamp: bool, cap: u64, cur: &mut Vec<u64>, out: &mut Vec<Vec<u64>>) {
    let lo = relax_u(18);
    let Some((&f, more)) = pairs.split_first() else {
        if clamp {
            for r in lo..=cap {
                cur.push(r);
                out.push(cur.clone());
                cur.pop();
            }
        } else {
            out.push(cur.clone());
        }
        return;
    };
    for second in [2 * f, 2 * f + 1] {
        if second < lo || second > cap {
            continue;
        }
        for first in second..=cap {
            cur.push(first);
            cur.push(second);
            pair_sources(more, clamp, second, cur, out);
            cur.pop();
            cur.pop();
        }
    }
}

fn build_one(id: TableId, solver: &SolverConfig, pool: &rayon::ThreadPool) -> Result<ScheduleTable, BgtError> {
    let dom = Domain::new(id);
    let mut keys = dom.superset();
    keys.sort_by_key(|&k| (std::cmp::Reverse(dom.len(k)), dom.index_sum(k), k));
    let index: HashMap<u128, usize> = keys.iter().enumerate().map(|(i, &k)| (k, i)).collect();
    let mut covered = vec![false; keys.len()];
    let mut table = ScheduleTable { id, reachable: 0, entries: BTreeMap::new(), unschedulable: BTreeSet::new() };
    let mut start = 0;
    while start < keys.len() {
        let level = (dom.len(keys[start]), dom.index_sum(keys[start]));
        let mut end = start;
        while end < keys.len() && (dom.len(keys[end]), dom.index_sum(keys[end])) == level {
            end += 1;
        }
        let mut todo = Vec::new();
        for i in start..end {
            let k = keys[i];
            covered[i] = dom.up_neighbors(k).any(|u| index.get(&u).is_some_and(|&j| covered[j]));
            if dom.reachable(k) {
                table.reachable += 1;
                if !covered[i] {
                    todo.push(i);
                }
            }
        }
        let solved: Vec<Result<(usize, Option<CyclicSchedule>), BgtError>> = pool.install(|| {
            todo.par_iter()
                .map(|&i| {
                    let key = dom.values(keys[i]);
                    let a = TaskPeriods::packing(&key);
                    let (v, _) = solve(&a, solver)?;
                    Ok((i, match v.outcome {
                        Outcome::Schedulable(s) => Some(s),
                        Outcome::Unschedulable => None,
                    }))
                })
                .collect()
        });
        for r in solved {
            let (i, s) = r?;
            let key = dom.values(keys[i]);
            match s {
                Some(s) => {
                    if !verify_packing(&TaskPeriods::packing(&key), &s)? {
                        return Err(BgtError::Unverified(key_string(&key)));
                    }
                    covered[i] = true;
                    table.entries.insert(key, s);
                }
                None => {
                    // T1 misses fall back to T2; anywhere else this is fatal.
                    let level = if id == TableId::T1 { log::Level::Debug } else { log::Level::Warn };
                    log::log!(level, "table {id}: reachable key {} is unschedulable", key_string(&key));
                    table.unschedulable.insert(key);
                }
            }
        }
        start = end;
    }
    log::info!(
        "table {id}: {} superset keys, {} reachable, {} stored, {} unschedulable",
        keys.len(),
        table.reachable,
        table.entries.len(),
        table.unschedulable.len()
    );
    Ok(table)
}

/// Bits per multiplicity in a packed key.
const COUNT_BITS: u32 = 4;

/// The reachable keys of one table, in exact scaled arithmetic.
///
/// A key element `c` can stand for an unfolded period `x` with
/// `⌊9x/7⌋ = c`, for a halved period in `(θ/2, θ]`, or for the clamp `θ`.
/// Folding raises the density by less than `1/θ`, and by less than
/// `1/(2x)` when no clamp happens and `x` is the smallest halved result, so
/// a key is reachable only if some choice of stand-ins, with that slack
/// subtracted, stays within the density bound of the unfolded instance.
pub(crate) struct Domain {
    base: Option<u64>,
    /// Relaxed values a non-base element can take, ascending.
    cs: Vec<u64>,
    /// Scaled weight of the unfolded stand-in, if one exists.
    int_w: Vec<Option<i128>>,
    /// Scaled infimum weight of a halved stand-in, if one exists.
    half_w: Vec<Option<i128>>,
    /// Index of `⌊9θ/7⌋`, the only value a clamp produces.
    clamp: usize,
    base_w: i128,
    scale: i128,
}

fn relax_u(x: u64) -> u64 {
    9 * x / 7
}

impl Domain {
    pub(crate) fn new(id: TableId) -> Self {
        let theta = id.theta();
        let c_max = relax_u(theta);
        let mut denoms: Vec<i128> = vec![3, 48, 75, 96, 147, theta as i128];
        let mut cs = Vec::new();
        let mut opts = Vec::new();
        for c in 0..=c_max {
            let int_x = (4..=theta).find(|&x| relax_u(x) == c);
            // Some x in (θ/2, θ] has ⌊9x/7⌋ = c.
            let halved = 14 * (c + 1) > 9 * theta && 7 * c <= 9 * theta;
            if int_x.is_none() && !halved {
                continue;
            }
            if let Some(x) = int_x {
                denoms.push(x as i128);
            }
            denoms.push(7 * (c as i128 + 1));
            cs.push(c);
            opts.push((int_x, halved));
        }
        let scale = 2 * denoms.iter().fold(1i128, |acc, &d| acc.lcm(&d));
        let int_w = opts.iter().map(|&(x, _)| x.map(|x| scale / x as i128)).collect();
        let half_w = cs
            .iter()
            .zip(&opts)
            .map(|(&c, &(_, h))| {
                h.then(|| {
                    // sup of the halved stand-in is min(7(c+1)/9, θ)
                    let via_floor = scale * 9 / (7 * (c as i128 + 1));
                    via_floor.max(scale / theta as i128)
                })
            })
            .collect();
        let clamp = cs.iter().position(|&c| c == c_max).expect("θ relaxes to a listed value");
        let base_w = id.base().map_or(0, |b| scale / b as i128);
        Domain { base: id.base(), cs, int_w, half_w, clamp, base_w, scale }
    }

    fn ratio(&self, n: i128, d: i128) -> i128 {
        self.scale * n / d
    }

    fn count(&self, key: u128, i: usize) -> u32 {
        ((key >> (COUNT_BITS * i as u32)) & ((1 << COUNT_BITS) - 1)) as u32
    }

    fn counts(&self, key: u128) -> Vec<u32> {
        (0..self.cs.len()).map(|i| self.count(key, i)).collect()
    }

    fn len(&self, key: u128) -> u32 {
        self.counts(key).iter().sum()
    }

    fn index_sum(&self, key: u128) -> u64 {
        self.counts(key).iter().enumerate().map(|(i, &n)| i as u64 * n as u64).sum()
    }

    pub(crate) fn values(&self, key: u128) -> Vec<u64> {
        let mut v: Vec<u64> = self.base.into_iter().collect();
        for (i, n) in self.counts(key).into_iter().enumerate() {
            v.extend(std::iter::repeat(self.cs[i]).take(n as usize));
        }
        v
    }

    /// Packs a sorted key (base included) into counts.
    pub(crate) fn pack(&self, key: &[u64]) -> Option<u128> {
        let rest = match self.base {
            Some(b) => key.strip_prefix(&[b])?,
            None => key,
        };
        let mut k = 0u128;
        for c in rest {
            let i = self.cs.iter().position(|x| x == c)?;
            if self.count(k, i) + 1 >= 1 << COUNT_BITS {
                return None;
            }
            k += 1 << (COUNT_BITS * i as u32);
        }
        Some(k)
    }

    fn loose_w(&self, i: usize) -> i128 {
        [self.int_w[i], self.half_w[i]].into_iter().flatten().min().expect("listed values have a stand-in")
    }

    /// Every key whose lightest stand-ins fit in the loosest bound. Closed
    /// under removing an element and under raising one to the next value.
    fn superset(&self) -> Vec<u128> {
        let theta_w = self.loose_w(self.clamp);
        let budget = self.scale - self.base_w + theta_w;
        let mut out = Vec::new();
        self.grow(0, 0, budget, &mut out);
        out
    }

    fn grow(&self, i: usize, key: u128, left: i128, out: &mut Vec<u128>) {
        if i == self.cs.len() {
            out.push(key);
            return;
        }
        let w = self.loose_w(i);
        let mut k = key;
        let mut left = left;
        let mut n = 0;
        loop {
            self.grow(i + 1, k, left, out);
            if w >= left || n + 1 >= (1 << COUNT_BITS) - 1 {
                break;
            }
            left -= w;
            k += 1 << (COUNT_BITS * i as u32);
            n += 1;
        }
    }

    /// Keys covering this one that differ by one step: one more element, or
    /// one element moved to the next smaller value.
    fn up_neighbors(&self, key: u128) -> impl Iterator<Item = u128> + '_ {
        let n = self.cs.len();
        let add = (0..n).filter(move |&i| self.count(key, i) + 1 < 1 << COUNT_BITS).map(move |i| key + (1 << (COUNT_BITS * i as u32)));
        let shift = (1..n)
            .filter(move |&i| self.count(key, i) > 0 && self.count(key, i - 1) + 1 < 1 << COUNT_BITS)
            .map(move |i| key - (1 << (COUNT_BITS * i as u32)) + (1 << (COUNT_BITS * (i - 1) as u32)));
        add.chain(shift)
    }

    /// The density bound of any unfolded instance this key comes from, or
    /// `None` for keys from excluded prefixes.
    fn bound(&self, counts: &[u32]) -> Option<i128> {
        if self.base.is_none() {
            return Some(self.scale);
        }
        let rest: Vec<u64> = counts
            .iter()
            .enumerate()
            .flat_map(|(i, &n)| std::iter::repeat(self.cs[i]).take(n as usize))
            .take(3)
            .collect();
        // The stand-ins below are all unfolded: 5, 6, 9, 7 and 10 relax
        // from 4, 5, 7, 6 and 8, and halved values relax higher.
        Some(match rest.as_slice() {
            [7, 7, 7, ..] => return None,
            [5, ..] => self.ratio(47, 48),
            [6, ..] => self.ratio(74, 75),
            [9, ..] => self.ratio(146, 147),
            [7, 7, 10, ..] => self.ratio(95, 96),
            _ => self.scale,
        })
    }

    pub(crate) fn reachable(&self, key: u128) -> bool {
        let counts = self.counts(key);
        let Some(db) = self.bound(&counts) else {
            return false;
        };
        let db = db - self.base_w;
        let present: Vec<usize> = (0..counts.len()).filter(|&i| counts[i] > 0).collect();
        let min_w = |i: usize| self.loose_w(i);
        // Nothing folded.
        if present.iter().all(|&i| self.int_w[i].is_some()) {
            let s: i128 = present.iter().map(|&i| self.int_w[i].unwrap() * counts[i] as i128).sum();
            if s <= db {
                return true;
            }
        }
        // One clamp; the clamped element's weight cancels the slack.
        if counts[self.clamp] > 0 {
            let s: i128 = present.iter().map(|&i| min_w(i) * (counts[i] - (i == self.clamp) as u32) as i128).sum();
            if s < db {
                return true;
            }
        }
        // No clamp; `e` holds the smallest halved value.
        for &e in &present {
            let Some(he) = self.half_w[e] else { continue };
            let mut s = he / 2;
            let mut ok = true;
            for &i in &present {
                let n = (counts[i] - (i == e) as u32) as i128;
                if n == 0 {
                    continue;
                }
                let w = if i < e { self.int_w[i] } else { Some(min_w(i)) };
                match w {
                    Some(w) => s += w * n,
                    None => {
                        ok = false;
                        break;
                    }
                }
            }
            if ok && s < db {
                return true;
            }
        }
        false
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slot_encoding_round_trips() {
        let s = vec![Some(0), None, Some(10), Some(61)];
        assert_eq!(encode_slots(&s), "0.aZ");
        assert_eq!(decode_slots("0.aZ").unwrap(), s);
        assert!(decode_slots("0#").is_err());
    }

    #[test]
    fn dominance_lookup_restricts() {
        let mut entries = BTreeMap::new();
        entries.insert(vec![3, 5, 9], CyclicSchedule::cycle([0, 1, 2, 0, 1, 0]));
        let t = ScheduleTable { id: TableId::T1, reachable: 2, entries, unschedulable: BTreeSet::new() };
        let Lookup::Found(s) = t.lookup(&[3, 6]) else { panic!() };
        assert_eq!(s.cycle, vec![Some(0), Some(1), None, Some(0), Some(1), Some(0)]);
        assert!(verify_packing(&TaskPeriods::packing(&[3, 6]), &s).unwrap());
        assert_eq!(t.lookup(&[2, 6]), Lookup::Absent);
    }

    #[test]
    fn domain_examples() {
        let d = Domain::new(TableId::T3);
        // (4,4,4,4) relaxes to (5,5,5,5), density exactly 1.
        assert!(d.reachable(d.pack(&[5, 5, 5, 5]).unwrap()));
        assert!(!d.reachable(d.pack(&[5, 5, 5, 5, 18]).unwrap()));
        // fourteen 14s relax to fourteen 18s
        assert!(d.reachable(d.pack(&[18; 14]).unwrap()));
        let t1 = Domain::new(TableId::T1);
        assert!(t1.reachable(t1.pack(&[3, 5, 7]).unwrap()));
        // (3,6,6,6) is handled before the tables
        assert!(!t1.reachable(t1.pack(&[3, 7, 7, 7]).unwrap()));
        // (3,4,4,4) has density above 1
        assert!(!t1.reachable(t1.pack(&[3, 5, 5, 5]).unwrap()));
        // (3,4,5) fits under 47/48
        assert!(t1.reachable(t1.pack(&[3, 5, 6]).unwrap()));
    }
}
