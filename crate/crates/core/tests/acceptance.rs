//! The ten primary acceptance criteria, each at its stated tolerance. Prints
//! one PASS/FAIL line per criterion and exits nonzero if any fails.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{self, AssertUnwindSafe};
use std::sync::mpsc;
use std::thread;
use std::time::{Duration, Instant};

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{checks, grounding};
use townsim::analytics::{daily_sales, substitution_report};
use townsim::clock::SimTime;
use townsim::decision::{validate_plan, FailureReason};
use townsim::economy::{final_price, Money, Rate};
use townsim::engine::{EventBody, EventLog, Simulation};
use townsim::memory::{decay, CommitmentStatus, MemoryEntry, MemoryKind, MemoryStream, NewMemory, RetrievalQuery};
use townsim::world::{IncomeKind, MemoryParams, Persona, RunMode};

const DISCOUNTED: &str = "Fried Chicken Shop";
const DINER: &str = "Local Diner";

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

macro_rules! ensure {
    ($cond:expr, $($arg:tt)+) => {{
        let ok: bool = $cond;
        if !ok {
            return Err(format!($($arg)+));
        }
    }};
}

fn within(started: Instant, budget: Duration) -> Result<(), String> {
    let took = started.elapsed();
    ensure!(took < budget, "took {took:.2?}, budget {budget:?}");
    Ok(())
}

fn pricing() -> Outcome {
    let t = Instant::now();
    let p = final_price(Money::from_cents(1200), Rate::from_fraction(0.20).unwrap()).map_err(|e| e.to_string())?;
    ensure!(
        p == Money::from_cents(960) && p.to_string() == "9.60",
        "12.00 at 20% gave {p}"
    );
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..1000 {
        let b = Money::from_cents(rng.random_range(1..=10_000_000));
        let got = final_price(b, Rate::ZERO).map_err(|e| e.to_string())?;
        ensure!(got == b, "{b} at 0% gave {got}");
    }
    within(t, Duration::from_secs(1))?;
    Ok(format!("9.60 and 1000 identities in {:.2?}", t.elapsed()))
}

fn replay() -> Outcome {
    let t = Instant::now();
    let sc = common::with_seed(&common::reference(), 42);
    ensure!(
        sc.personas.len() == 11 && sc.map.location_names().count() == 10 && sc.sim.days == 7,
        "reference is not 11 agents, 10 locations, 7 days"
    );
    let a = common::run_oracle(&sc, RunMode::Deterministic).log.to_jsonl();
    let b = common::run_oracle(&sc, RunMode::Deterministic).log.to_jsonl();
    ensure!(a == b, "logs differ");
    ensure!(!a.is_empty(), "empty log");
    within(t, Duration::from_secs(30))?;
    Ok(format!("{} identical bytes in {:.2?}", a.len(), t.elapsed()))
}

fn conservation() -> Outcome {
    let mut total = Money::ZERO;
    for sc in [common::reference(), common::reference_discount()] {
        total += checks::conservation(&sc, &common::run_oracle(&sc, RunMode::Deterministic))?;
    }
    Ok(format!("both runs reconcile, {total} of sales"))
}

fn energy_ladder() -> Outcome {
    let base = common::reference();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut emergencies, mut collapses) = (0, 0);
    for run in 0..100 {
        let sc = checks::fuzzed_scenario(&base, &mut rng);
        let stats = checks::energy_ladder(&sc, &common::run_oracle(&sc, RunMode::Deterministic))
            .map_err(|e| format!("run {run}: {e}"))?;
        emergencies += stats.emergencies;
        collapses += stats.collapses;
    }
    ensure!(emergencies > 0 && collapses > 0, "fuzzing never reached the ladder");
    Ok(format!("100 runs, {emergencies} emergencies, {collapses} collapses"))
}

fn grounding_check() -> Outcome {
    let sc = common::reference();
    let ctx = grounding::contexts(&sc, 13)
        .into_iter()
        .rev()
        .find(|c| c.persona.name == "Alex Johnson")
        .ok_or("no lunch context")?;
    let bistro = grounding::response("eat", "new bistro near Oak View Condos", None, ctx.now.tick);
    let e = validate_plan(&bistro, &ctx).err().ok_or("bistro accepted")?;
    ensure!(e.reason == FailureReason::UnknownLocation, "bistro: {e}");
    let smoothie = grounding::response("eat", "The Coffee Shop", Some("smoothie"), ctx.now.tick);
    let e = validate_plan(&smoothie, &ctx).err().ok_or("smoothie accepted")?;
    ensure!(e.reason == FailureReason::UnknownMenuItem, "smoothie: {e}");
    let stats = grounding::fuzz_validator(&sc, 1000, 0x5eed)?;
    ensure!(stats.accepted > 0 && stats.rejected > 0, "degenerate corpus {stats:?}");
    Ok(format!(
        "fixtures rejected, 1000 fuzzed: {} accepted, {} rejected",
        stats.accepted, stats.rejected
    ))
}

fn substitution() -> Outcome {
    let t = Instant::now();
    let (base, disc) = (common::reference(), common::reference_discount());
    let b = daily_sales(&common::run_oracle(&base, RunMode::Deterministic).log);
    let d = daily_sales(&common::run_oracle(&disc, RunMode::Deterministic).log);
    let r = substitution_report(&b, &d, 0.10).map_err(|e| e.to_string())?;
    ensure!(r.discount_days == [3, 4], "discount days {:?}", r.discount_days);
    let mut notes = Vec::new();
    for day in [3, 4] {
        let dd = r.days.iter().find(|x| x.day == day).ok_or("missing day")?;
        let fcs = dd.share_delta.get(DISCOUNTED).copied().unwrap_or(0.0);
        let diner = dd.share_delta.get(DINER).copied().unwrap_or(0.0);
        ensure!(fcs > 0.0, "day {day}: chicken share delta {fcs:+.4}");
        ensure!(diner < 0.0, "day {day}: diner share delta {diner:+.4}");
        notes.push(format!("d{day} chicken {fcs:+.3} diner {diner:+.3}"));
    }
    ensure!(r.total_change.abs() < 0.10, "total change {:+.4}", r.total_change);
    within(t, Duration::from_secs(60))?;
    Ok(format!("{}, total {:+.2}%", notes.join(", "), r.total_change * 100.0))
}

/// Where each agent ate each meal on the given days.
fn meal_places(log: &EventLog, days: &[u32]) -> BTreeMap<(String, u32, String), String> {
    log.events()
        .iter()
        .filter(|e| days.contains(&e.day))
        .filter_map(|e| match &e.body {
            EventBody::Meal {
                meal: Some(m),
                location,
                ..
            } => Some(((e.agent.clone(), e.day, m.clone()), location.clone())),
            _ => None,
        })
        .collect()
}

fn dpp_heterogeneity() -> Outcome {
    let (base, disc) = (common::reference(), common::reference_discount());
    let days = [3, 4];
    let b = meal_places(&common::run_oracle(&base, RunMode::Deterministic).log, &days);
    let t = meal_places(&common::run_oracle(&disc, RunMode::Deterministic).log, &days);
    // Per group: (switched, eligible) over meal slots not already at the shop.
    let mut high = (0u32, 0u32);
    let mut low = (0u32, 0u32);
    for p in &disc.personas {
        let group = if p.deal_proneness >= 0.7 {
            &mut high
        } else if p.deal_proneness <= 0.3 {
            &mut low
        } else {
            continue;
        };
        for (key, at) in b.iter().filter(|((a, _, _), _)| *a == p.name) {
            if at == DISCOUNTED {
                continue;
            }
            group.1 += 1;
            if t.get(key).is_some_and(|s| s == DISCOUNTED) {
                group.0 += 1;
            }
        }
    }
    ensure!(high.1 > 0 && low.1 > 0, "empty group: high {high:?} low {low:?}");
    let (hr, lr) = (high.0 as f64 / high.1 as f64, low.0 as f64 / low.1 as f64);
    ensure!(hr > lr, "high {hr:.3} not above low {lr:.3}");
    Ok(format!(
        "high {}/{} = {hr:.2}, low {}/{} = {lr:.2}",
        high.0, high.1, low.0, low.1
    ))
}

const PEOPLE: [&str; 5] = ["Ana", "Ben", "Cy", "Dee", "Eli"];

fn random_persona(rng: &mut ChaCha8Rng) -> Persona {
    let mut relationships = BTreeMap::new();
    for p in &PEOPLE[1..] {
        if rng.random_bool(0.7) {
            relationships.insert(p.to_string(), rng.random_range(0..=10) as f64 / 10.0);
        }
    }
    Persona {
        name: "Ana".into(),
        age: 30,
        occupation: "tester".into(),
        income_kind: IncomeKind::Monthly,
        income_amount: Money::ZERO,
        residence: "Home".into(),
        workplace: None,
        work_hours: None,
        owns: None,
        deal_proneness: 0.5,
        relationships,
        preferences: vec![],
        starting_money: Money::ZERO,
        starting_energy: 100,
        starting_grocery: 0,
    }
}

/// Exhaustive reference for retrieval: score everything from first
/// principles, sort, cut.
fn brute_force(entries: &[MemoryEntry], who: &Persona, q: &RetrievalQuery, params: &MemoryParams) -> Vec<u64> {
    let tpd = q.ticks_per_day as i64;
    let now = q.now.day as i64 * tpd + q.now.tick as i64;
    let mut scored: Vec<(f64, i64, u64)> = Vec::new();
    for e in entries {
        let at = e.time.day as i64 * tpd + e.time.tick as i64;
        let age = now - at;
        if age < 0 || params.horizon_ticks.is_some_and(|h| age as u64 > h) {
            continue;
        }
        let mut involved: Vec<&String> = e.participants.iter().collect();
        involved.push(&e.source_agent);
        let closeness = involved
            .into_iter()
            .filter(|p| **p != who.name)
            .map(|p| {
                if q.topic.contains(p) {
                    1.0
                } else {
                    who.relationships.get(p).copied().unwrap_or(0.0)
                }
            })
            .fold(None, |best: Option<f64>, v| Some(best.map_or(v, |b| b.max(v))))
            .unwrap_or(params.self_proximity);
        let s =
            params.time_weight * (-(age as f64) / params.half_life_ticks).exp2() + params.proximity_weight * closeness;
        scored.push((s, at, e.id));
    }
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(b.1.cmp(&a.1)).then(b.2.cmp(&a.2)));
    scored.into_iter().take(q.max_n).map(|x| x.2).collect()
}

fn memory_retrieval() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut compared = 0;
    for stream_no in 0..200 {
        let who = random_persona(&mut rng);
        let mut params = MemoryParams {
            half_life_ticks: rng.random_range(1..=96) as f64,
            ..MemoryParams::default()
        };
        if rng.random_bool(0.3) {
            params.horizon_ticks = Some(rng.random_range(0..200));
        }
        let mut s = MemoryStream::new(&who.name);
        for _ in 0..rng.random_range(0..60) {
            let source = *PEOPLE.choose(&mut rng).unwrap();
            let mut m = NewMemory::new(
                SimTime::new(rng.random_range(1..=7), rng.random_range(0..24)),
                MemoryKind::Event,
                source,
                "x",
            );
            let others: Vec<&str> = PEOPLE.iter().copied().filter(|_| rng.random_bool(0.25)).collect();
            m = m.with_participants(others);
            s.ingest(m);
        }
        let q = RetrievalQuery {
            now: SimTime::new(rng.random_range(1..=8), rng.random_range(0..24)),
            ticks_per_day: 24,
            topic: PEOPLE
                .iter()
                .filter(|_| rng.random_bool(0.15))
                .map(|p| p.to_string())
                .collect::<BTreeSet<_>>(),
            max_n: rng.random_range(0..12),
        };
        let got: Vec<u64> = s.retrieve(&who, &q, &params).iter().map(|e| e.id).collect();
        let want = brute_force(s.entries(), &who, &q, &params);
        ensure!(got == want, "stream {stream_no}: {got:?} vs {want:?}");
        compared += got.len();
    }
    for h in [1.0, 7.5, 24.0, 168.0] {
        ensure!(decay(h, h) == 0.5, "decay({h}, {h}) = {}", decay(h, h));
        ensure!(decay(0.0, h) == 1.0, "decay(0, {h}) = {}", decay(0.0, h));
    }
    Ok(format!(
        "200 streams, {compared} ranked entries match; decay halves at half-life"
    ))
}

fn concurrency() -> Outcome {
    let t = Instant::now();
    let (tx, rx) = mpsc::channel();
    thread::spawn(move || {
        let sc = common::reference();
        let mut result = Ok(());
        for seed in 0..50 {
            let s = common::with_seed(&sc, seed);
            let det = checks::aggregates(&common::run_oracle(&s, RunMode::Deterministic));
            let par = checks::aggregates(&common::run_oracle(&s, RunMode::Parallel));
            if det != par {
                result = Err(format!("seed {seed}: deterministic {det:?} vs parallel {par:?}"));
                break;
            }
        }
        let _ = tx.send(result);
    });
    match rx.recv_timeout(Duration::from_secs(600)) {
        Ok(r) => r?,
        Err(_) => return Err("no result within 600 s, presumed deadlock".into()),
    }
    Ok(format!("50 seeds agree in {:.2?}", t.elapsed()))
}

fn commitment() -> Outcome {
    let sc = checks::cafe_scenario(&common::reference());
    let backend = checks::CafeDate::new(common::oracle_for(&sc));
    let mut sim = Simulation::new(&sc, &backend);
    let mut together = false;
    while sim.step() {
        let done = sim.now();
        if (done.day, done.tick) == (1, 10) {
            together = sc
                .personas
                .iter()
                .all(|p| sim.agent(&p.name).is_some_and(|a| a.position == "The Coffee Shop"));
        }
    }
    let out = sim.finish().map_err(|e| e.to_string())?;
    let said = out.log.events().iter().any(|e| {
        matches!(&e.body, EventBody::Conversation { transcript, .. } if transcript.iter().any(|(_, t)| t == checks::CAFE_LINE))
    });
    ensure!(said, "the invitation was never spoken");
    ensure!(out.commitments.len() == 1, "{} commitments", out.commitments.len());
    let c = &out.commitments[0];
    ensure!(c.location == "The Coffee Shop", "stored at {}", c.location);
    ensure!(
        (c.scheduled.day, c.scheduled.tick) == (1, 9),
        "scheduled {:?}",
        c.scheduled
    );
    ensure!(together, "not both at The Coffee Shop during tick 9");
    ensure!(c.status == CommitmentStatus::Fulfilled, "status {:?}", c.status);
    Ok("stored at The Coffee Shop for 09:00, both present, fulfilled".into())
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("pricing", pricing),
        ("deterministic replay", replay),
        ("money conservation", conservation),
        ("energy safety ladder", energy_ladder),
        ("grounding", grounding_check),
        ("substitution", substitution),
        ("deal-proneness heterogeneity", dpp_heterogeneity),
        ("memory retrieval", memory_retrieval),
        ("concurrency", concurrency),
        ("commitment", commitment),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let result = panic::catch_unwind(AssertUnwindSafe(check))
            .unwrap_or_else(|p| Err(p.downcast_ref::<String>().cloned().unwrap_or_else(|| "panicked".into())));
        let took = t.elapsed();
        match result {
            Ok(detail) => println!("PASS {:>2} {name}: {detail} [{took:.2?}]", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {why} [{took:.2?}]", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
