//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::io::{BufRead, BufReader};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Stdio};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use num_bigint::BigInt;
use num_traits::{Signed, Zero};
use rand::{Rng, SeedableRng};
use secant_core::algebra::{count_real_roots, GroebnerConfig, UniPoly};
use secant_core::prng::SeedState;
use secant_core::schubert::{
    enumerate_problems, hook_length_rectangle, intersection_number, make_instances, master_points, Outcome,
    Partition, SchubertProblem, INSTANCES_PER_CHOICE,
};
use secant_core::table::FrequencyTable;
use secant_service::store::StoreData;

const BIN: &str = env!("CARGO_BIN_EXE_secant");

/// Every `(degree, real_count)` observed anywhere in the run.
static OBSERVED: Mutex<Vec<(u64, u64)>> = Mutex::new(Vec::new());

fn observe(degree: u64, real: u64, count: u64) {
    let mut o = OBSERVED.lock().unwrap();
    for _ in 0..count {
        o.push((degree, real));
    }
}

fn observe_store(path: &Path) {
    let data = StoreData::from_text(&std::fs::read_to_string(path).unwrap()).unwrap();
    for (id, res) in &data.results {
        let degree = data.problems[id].problem.degree;
        for c in res.cells.cells() {
            observe(degree, c.real, c.count);
        }
    }
}

type Check = fn() -> Result<String, String>;

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn within(start: Instant, limit: Duration, what: &str) -> Result<(), String> {
    let took = start.elapsed();
    ensure(took < limit, format!("{what} took {took:?}, limit {limit:?}"))
}

fn ones(n: usize) -> Vec<Partition> {
    vec![Partition::new(vec![1]).unwrap(); n]
}

fn intersection_numbers() -> Result<String, String> {
    let start = Instant::now();
    let a = intersection_number(2, 4, &ones(4)).map_err(|e| e.to_string())?;
    let b = intersection_number(3, 7, &ones(12)).map_err(|e| e.to_string())?;
    let c = intersection_number(3, 6, &ones(9)).map_err(|e| e.to_string())?;
    let hook = hook_length_rectangle(3, 3);
    within(start, Duration::from_secs(1), "intersection numbers")?;
    ensure(a == 2, format!("G(2,4) four lines gave {a}"))?;
    ensure(b == 462, format!("G(3,7) twelve conditions gave {b}"))?;
    ensure(c == 42 && hook == 42, format!("G(3,6) gave {c}, hook-length {hook}"))?;
    Ok(format!("2, 462, 42 (hook {hook})"))
}

fn enumeration() -> Result<String, String> {
    let start = Instant::now();
    let g24 = enumerate_problems(2, 4, 2).map_err(|e| e.to_string())?.len();
    let g25 = enumerate_problems(2, 5, 2).map_err(|e| e.to_string())?.len();
    within(start, Duration::from_secs(10), "enumeration")?;
    ensure(g24 == 1 && g25 == 5, format!("G(2,4): {g24}, G(2,5): {g25}"))?;
    Ok("G(2,4): 1, G(2,5): 5".into())
}

fn master_set() -> Result<String, String> {
    let n = master_points().len();
    ensure(n == 111, format!("{n} points"))?;
    Ok("111 points".into())
}

/// Solves the disjoint instance of each of `choices` T-draws.
fn disjoint_run(spec: &str, seed: u64, choices: usize) -> Result<(u64, Vec<u64>), String> {
    let problem: SchubertProblem = spec.parse().map_err(|e: secant_core::schubert::SchubertError| e.to_string())?;
    let mut state = SeedState::new(seed);
    let instances = make_instances(&problem, &mut state, choices).map_err(|e| e.to_string())?;
    let mut degenerate = 0;
    let mut reals = Vec::new();
    for inst in instances.iter().step_by(INSTANCES_PER_CHOICE) {
        assert_eq!(inst.overlap, 0);
        match inst.solve(&problem, &GroebnerConfig::default()).map_err(|e| e.to_string())? {
            Outcome::Solved { real_count, .. } => {
                observe(problem.degree, real_count, 1);
                reals.push(real_count);
            }
            Outcome::Degenerate(_) => degenerate += 1,
        }
    }
    Ok((degenerate, reals))
}

fn secant_codim_two() -> Result<String, String> {
    let start = Instant::now();
    let (d4, r4) = disjoint_run("2 4 | 1;1;1;1", 2024, 200)?;
    let t4 = start.elapsed();
    ensure(t4 < Duration::from_secs(60), format!("G(2,4) took {t4:?}"))?;
    let start5 = Instant::now();
    let (d5, r5) = disjoint_run("2 5 | 1;1;1;1;1;1", 2025, 50)?;
    let t5 = start5.elapsed();
    ensure(t5 < Duration::from_secs(600), format!("G(2,5) took {t5:?}"))?;
    let bad4 = r4.iter().filter(|&&r| r != 2).count();
    let bad5 = r5.iter().filter(|&&r| r != 5).count();
    ensure(bad4 == 0, format!("{bad4} G(2,4) instances not fully real"))?;
    ensure(bad5 == 0, format!("{bad5} G(2,5) instances not fully real"))?;
    ensure((d4 as f64) < 0.05 * 200.0, format!("G(2,4) degenerate {d4}/200"))?;
    ensure((d5 as f64) < 0.05 * 50.0, format!("G(2,5) degenerate {d5}/50"))?;
    Ok(format!(
        "G(2,4): {} real=2, {d4} degenerate in {t4:.1?}; G(2,5): {} real=5, {d5} degenerate in {t5:.1?}",
        r4.len(),
        r5.len()
    ))
}

/// Root count by Descartes' rule with interval bisection over exact integers.
mod bisection {
    use super::*;

    fn variations(c: &[BigInt]) -> usize {
        let signs: Vec<bool> = c.iter().filter(|x| !x.is_zero()).map(|x| x.is_positive()).collect();
        signs.windows(2).filter(|w| w[0] != w[1]).count()
    }

    /// Coefficients (ascending) of p(x + 1).
    fn taylor_shift(p: &[BigInt]) -> Vec<BigInt> {
        let mut c = p.to_vec();
        let n = c.len();
        for i in 0..n {
            for j in (i..n - 1).rev() {
                let t = c[j + 1].clone();
                c[j] += t;
            }
        }
        c
    }

    /// Coefficients of (1 + x)^n p(1 / (1 + x)): Descartes bound on (0, 1).
    fn descartes_01(p: &[BigInt]) -> usize {
        let rev: Vec<BigInt> = p.iter().rev().cloned().collect();
        variations(&taylor_shift(&rev))
    }

    /// 2^n p(x / 2).
    fn halve(p: &[BigInt]) -> Vec<BigInt> {
        let n = p.len() - 1;
        p.iter().enumerate().map(|(i, c)| c << (n - i)).collect()
    }

    fn eval_half(p: &[BigInt]) -> BigInt {
        let n = p.len() - 1;
        p.iter().enumerate().map(|(i, c)| c << (n - i)).sum()
    }

    /// Roots of a square-free p in the open interval (0, 1).
    fn roots_01(p: &[BigInt]) -> usize {
        match descartes_01(p) {
            0 => 0,
            1 => 1,
            _ => {
                let mid = usize::from(eval_half(p).is_zero());
                let left = halve(p);
                let right = taylor_shift(&left);
                mid + roots_01(&left) + roots_01(&right)
            }
        }
    }

    /// Positive roots, after scaling by a power of two past Cauchy's bound.
    fn positive_roots(p: &[BigInt]) -> usize {
        let lead = p.last().unwrap().abs();
        let max = p.iter().map(|c| c.abs()).max().unwrap();
        let mut shift = 0;
        while (BigInt::from(1) << shift) * &lead <= &lead + &max {
            shift += 1;
        }
        let scaled: Vec<BigInt> = p.iter().enumerate().map(|(i, c)| c << (shift * i)).collect();
        roots_01(&scaled)
    }

    pub fn count(p: &[i64]) -> usize {
        let mut c: Vec<BigInt> = p.iter().map(|&x| BigInt::from(x)).collect();
        let mut zero = 0;
        while c[0].is_zero() {
            c.remove(0);
            zero += 1;
        }
        let neg: Vec<BigInt> =
            c.iter().enumerate().map(|(i, x)| if i % 2 == 1 { -x.clone() } else { x.clone() }).collect();
        zero.min(1) + positive_roots(&c) + positive_roots(&neg)
    }
}

fn sturm_oracle() -> Result<String, String> {
    let start = Instant::now();
    let mut rng = rand::rngs::StdRng::seed_from_u64(20_100_101);
    let mut tested = 0;
    let mut mismatches = Vec::new();
    while tested < 1000 {
        let degree = rng.random_range(1..=6);
        let mut coeffs: Vec<i64> = (0..=degree).map(|_| rng.random_range(-100..=100)).collect();
        while coeffs[degree] == 0 {
            coeffs[degree] = rng.random_range(-100..=100);
        }
        let f = UniPoly::from_integers(&coeffs);
        if f.is_squarefree() != Some(true) {
            continue;
        }
        tested += 1;
        let sturm = count_real_roots(&f).map_err(|e| e.to_string())?;
        let oracle = bisection::count(&coeffs);
        if sturm != oracle {
            mismatches.push(format!("{coeffs:?}: sturm {sturm}, bisection {oracle}"));
        }
    }
    within(start, Duration::from_secs(60), "1000 polynomials")?;
    ensure(mismatches.is_empty(), format!("{} mismatches, first {:?}", mismatches.len(), mismatches.first()))?;
    Ok(format!("1000 polynomials agree in {:.1?}", start.elapsed()))
}

fn secant(args: &[&str]) -> Result<String, String> {
    let out = Command::new(BIN).args(args).output().map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!(
            "secant {} exited {:?}: {}",
            args.join(" "),
            out.status.code(),
            String::from_utf8_lossy(&out.stderr)
        ));
    }
    Ok(String::from_utf8_lossy(&out.stdout).into_owned())
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

struct Coordinator {
    child: Child,
    url: String,
}

impl Coordinator {
    fn start(dir: &Path, store: &Path, lease_floor: u64) -> Result<Self, String> {
        let cfg = dir.join("coordinator.conf");
        std::fs::write(
            &cfg,
            format!(
                "listen_addr = 127.0.0.1:0\nstore_path = {}\nscheduler_period_seconds = 1\nsnapshot_interval_seconds = 3600\nlease_floor_seconds = {lease_floor}\n",
                store.display()
            ),
        )
        .map_err(|e| e.to_string())?;
        let log = std::fs::File::create(dir.join("coordinator.log")).map_err(|e| e.to_string())?;
        let mut child = Command::new(BIN)
            .args(["coordinate", "--config", s(&cfg)])
            .stdout(Stdio::piped())
            .stderr(log)
            .spawn()
            .map_err(|e| e.to_string())?;
        let mut line = String::new();
        BufReader::new(child.stdout.take().unwrap()).read_line(&mut line).map_err(|e| e.to_string())?;
        let addr = line.trim().strip_prefix("listening on ").ok_or(format!("unexpected output {line:?}"))?;
        Ok(Coordinator { url: format!("http://{addr}"), child })
    }

    fn status(&self) -> serde_json::Value {
        http_get_json(&self.url, "/api/status")
    }

    fn completed(&self, id: u64) -> u64 {
        http_get_json(&self.url, &format!("/api/problems/{id}"))["packets_completed"].as_u64().unwrap()
    }
}

impl Drop for Coordinator {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// Minimal HTTP GET over a raw socket, so the suite needs no client crate.
fn http_get_json(url: &str, path: &str) -> serde_json::Value {
    use std::io::{Read, Write};
    let addr = url.strip_prefix("http://").unwrap();
    let mut stream = std::net::TcpStream::connect(addr).unwrap();
    write!(stream, "GET {path} HTTP/1.1\r\nHost: {addr}\r\nConnection: close\r\n\r\n").unwrap();
    let mut buf = String::new();
    stream.read_to_string(&mut buf).unwrap();
    let (head, body) = buf.split_once("\r\n\r\n").unwrap();
    let body = if head.to_ascii_lowercase().contains("transfer-encoding: chunked") {
        dechunk(body)
    } else {
        body.to_string()
    };
    serde_json::from_str(&body).unwrap()
}

fn dechunk(mut body: &str) -> String {
    let mut out = String::new();
    loop {
        let (size, rest) = body.split_once("\r\n").unwrap();
        let n = usize::from_str_radix(size.trim(), 16).unwrap();
        if n == 0 {
            return out;
        }
        out.push_str(&rest[..n]);
        body = &rest[n + 2..];
    }
}

struct Worker(Child);

impl Worker {
    fn start(dir: &Path, url: &str, parallelism: usize, tag: &str) -> Self {
        let log = std::fs::File::create(dir.join(format!("worker-{tag}.log"))).unwrap();
        let child = Command::new(BIN)
            .args(["work", "--coordinator", url, "--max-seconds", "3600", "--parallelism", &parallelism.to_string()])
            .args(["--backoff-base-seconds", "0.5"])
            .stdout(Stdio::null())
            .stderr(log)
            .spawn()
            .unwrap();
        Worker(child)
    }

    fn pid(&self) -> u32 {
        self.0.id()
    }
}

impl Drop for Worker {
    fn drop(&mut self) {
        let _ = self.0.kill();
        let _ = self.0.wait();
    }
}

fn wait_for(limit: Duration, mut done: impl FnMut() -> bool) -> Result<(), String> {
    let start = Instant::now();
    while !done() {
        if start.elapsed() > limit {
            return Err(format!("timed out after {limit:?}"));
        }
        std::thread::sleep(Duration::from_millis(200));
    }
    Ok(())
}

/// A fresh four-lines store with `packets` requested.
fn four_lines_store(dir: &Path, seed: u64, target_seconds: f64, packets: u64) -> Result<PathBuf, String> {
    let store = dir.join("experiment.store");
    secant(&["init", "--store", s(&store), "--master-seed", &seed.to_string()])?;
    secant(&["load", "--store", s(&store), "--grassmannian", "2,4", "--target-packet-seconds", &target_seconds.to_string()])?;
    secant(&["request", "--store", s(&store), "--problem", "1", "--packets", &packets.to_string()])?;
    Ok(store)
}

fn read_store(path: &Path) -> StoreData {
    StoreData::from_text(&std::fs::read_to_string(path).unwrap()).unwrap()
}

static REPRO_DIR: Mutex<Option<tempfile::TempDir>> = Mutex::new(None);

fn reproducibility() -> Result<String, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let store = four_lines_store(dir.path(), 6_031, 0.3, 5)?;
    {
        let coord = Coordinator::start(dir.path(), &store, 120)?;
        let _w = Worker::start(dir.path(), &coord.url, 2, "repro");
        wait_for(Duration::from_secs(240), || coord.completed(1) == 5)?;
    }
    observe_store(&store);
    let scratch1 = dir.path().join("scratch-1.store");
    let scratch4 = dir.path().join("scratch-4.store");
    let out1 = secant(&["verify", "--store", s(&store), "--problem", "1", "--packets", "1-5", "--scratch", s(&scratch1), "--parallelism", "1"])?;
    let out4 = secant(&["verify", "--store", s(&store), "--problem", "1", "--packets", "1-5", "--scratch", s(&scratch4), "--parallelism", "4"])?;
    ensure(out1.contains("5 matched, 0 mismatched"), out1.clone())?;
    ensure(out4.contains("5 matched, 0 mismatched"), out4.clone())?;
    let (a, b) = (read_store(&scratch1), read_store(&scratch4));
    let cells = |d: &StoreData| -> Vec<(u64, FrequencyTable, u64)> {
        d.journal.values().map(|j| (j.packet_index, j.cells.clone(), j.degenerate_count)).collect()
    };
    ensure(cells(&a).len() == 5, "scratch store lacks packets")?;
    ensure(cells(&a) == cells(&b), "scratch stores differ")?;
    ensure(a.results[&1].cells == b.results[&1].cells, "scratch totals differ")?;
    let ipp = read_store(&store).problems[&1].instances_per_packet;
    *REPRO_DIR.lock().unwrap() = Some(dir);
    Ok(format!("packets 1-5 ({ipp} instances each) identical at parallelism 1 and 4, and match the journal"))
}

fn crash_recovery() -> Result<String, String> {
    let start = Instant::now();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let store = four_lines_store(dir.path(), 8_128, 1.5, 20)?;
    let coord = Coordinator::start(dir.path(), &store, 5)?;
    let _survivor = Worker::start(dir.path(), &coord.url, 1, "survivor");
    let mut victims = Vec::new();
    let mut orphaned = false;
    for attempt in 0..5 {
        let mut victim = Worker::start(dir.path(), &coord.url, 1, &format!("victim-{attempt}"));
        let tag = format!("-{}-", victim.pid());
        let holds_lease = |st: &serde_json::Value| {
            st["running"].as_array().unwrap().iter().any(|r| r["worker_id"].as_str().unwrap().contains(&tag))
        };
        if wait_for(Duration::from_secs(60), || holds_lease(&coord.status())).is_err() {
            victims.push(victim);
            continue;
        }
        let _ = victim.0.kill();
        let _ = victim.0.wait();
        orphaned = holds_lease(&coord.status());
        victims.push(victim);
        if orphaned {
            break;
        }
    }
    ensure(orphaned, "never caught a worker mid-packet")?;
    let _replacement = Worker::start(dir.path(), &coord.url, 1, "replacement");
    wait_for(Duration::from_secs(240), || coord.completed(1) == 20)?;
    let printed = secant(&["status", "--coordinator", &coord.url])?;
    ensure(printed.contains("20/20 packets"), format!("status output {printed:?}"))?;
    drop(coord);

    let data = read_store(&store);
    observe_store(&store);
    let req = data.requests[&1];
    let res = &data.results[&1];
    let ipp = data.problems[&1].instances_per_packet;
    ensure(req.packets_completed == 20, format!("completed {}", req.packets_completed))?;
    let keys: std::collections::BTreeSet<u64> = data.journal.keys().map(|&(_, i)| i).collect();
    ensure(data.journal.len() == 20 && keys == (1..=20).collect(), format!("journal keys {keys:?}"))?;
    ensure(res.cells.total() + res.degenerate_count == 20 * ipp, "accounting identity violated")?;
    data.check_invariants()?;
    let events = data.events.reclaimed + data.events.superseded;
    ensure(events >= 1, "no reclaimed or superseded event")?;
    within(start, Duration::from_secs(300), "crash recovery")?;
    Ok(format!(
        "20/20 packets, {} instances, reclaimed {}, superseded {}, {:.1?}",
        20 * ipp,
        data.events.reclaimed,
        data.events.superseded,
        start.elapsed()
    ))
}

fn table_two_report() -> Result<String, String> {
    let guard = REPRO_DIR.lock().unwrap();
    let dir = guard.as_ref().ok_or("needs the reproducibility run's store")?;
    let store = dir.path().join("experiment.store");
    let csv = dir.path().join("table.csv");
    let text = secant(&["report", "--store", s(&store), "--problem", "1", "--csv", s(&csv)])?;
    let table = FrequencyTable::from_csv(&std::fs::read_to_string(&csv).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    ensure(table == read_store(&store).results[&1].cells, "CSV does not round-trip the stored table")?;
    let csv_text = std::fs::read_to_string(&csv).unwrap();
    let labels: Vec<&str> = csv_text.lines().map(|l| l.split(',').next().unwrap()).collect();
    ensure(labels == ["real\\overlap", "0", "2", "Total"], format!("row labels {labels:?}"))?;
    ensure(table.max_overlap().unwrap_or(0) > 0, "run has no overlapping instances")?;
    ensure(table.get(0, 0) == 0 && table.get(2, 0) > 0, "overlap-0 column has mass outside real=2")?;
    let rows: u64 = [0, 2].iter().map(|&r| table.row_total(r)).sum();
    let cols: u64 = (0..=table.max_overlap().unwrap()).map(|o| table.column_total(o)).sum();
    ensure(rows == table.total() && cols == table.total(), "row/column sums disagree")?;
    let grid: Vec<&str> = text.lines().filter(|l| l.contains('|') && !l.starts_with("problem")).collect();
    ensure(grid.len() == 4, format!("text table has {} grid lines", grid.len()))?;
    ensure(text.contains("inner border"), "no inner border line")?;
    Ok(format!(
        "{} instances over overlaps 0..={}, overlap 0 all real=2 ({})",
        table.total(),
        table.max_overlap().unwrap(),
        table.get(2, 0)
    ))
}

fn parity_and_bounds() -> Result<String, String> {
    let observed = OBSERVED.lock().unwrap();
    ensure(!observed.is_empty(), "no instances observed")?;
    let bad: Vec<_> = observed.iter().filter(|(d, r)| r % 2 != d % 2 || r > d).collect();
    ensure(bad.is_empty(), format!("{} violations, e.g. {:?}", bad.len(), bad.first()))?;
    Ok(format!("{} instances checked", observed.len()))
}

fn main() {
    let checks: [(&str, Check); 9] = [
        ("intersection numbers", intersection_numbers),
        ("problem enumeration", enumeration),
        ("master set", master_set),
        ("secant conjecture on G(2,4) and G(2,5)", secant_codim_two),
        ("sturm oracle equivalence", sturm_oracle),
        ("bit-exact reproducibility", reproducibility),
        ("crash recovery", crash_recovery),
        ("table-2-shaped report", table_two_report),
        ("parity and bounds", parity_and_bounds),
    ];
    let mut failed = 0;
    for (name, check) in checks {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or(p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        match outcome {
            Ok(detail) => println!("PASS  {name}: {detail} [{:.1?}]", start.elapsed()),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name}: {why} [{:.1?}]", start.elapsed());
            }
        }
    }
    *REPRO_DIR.lock().unwrap() = None;
    println!("acceptance: {} passed, {failed} failed", checks.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
