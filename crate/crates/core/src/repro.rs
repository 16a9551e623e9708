//! Executable reference checks.
//!
//! Each `check_*` function recomputes a reference number or property with an
//! oracle that does not share code with the routine under test, and reports
//! whether the result is within tolerance and inside its time budget.

use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::path::PathBuf;
use std::time::{Duration, Instant};

use rayon::prelude::*;

use crate::encoding::CanonicalEncode;
use crate::oversight::{
    BatchScenario, all_captured_probability, assign_randomly, detection_probability,
    simulate_batch_smuggling,
};
use crate::protocol::{
    Approval, ApproverPolicy, CapabilityGrant, ConflictKind, DeviceMode, DeviceState,
    ExtensionCertificate, Fraction, FirmwareUpdate, Limit, LocationConfig, LandmarkResponse,
    Ruleset, SignedArtifact, SignerDevice, Verdict, WorkloadClass, WorkloadDescriptor,
    detect_equivocation, issue_license, verify_update_approval,
};
use crate::rng::SimRng;
use crate::scenario::{Format, emit_report, parse_config, run_scenario};
use crate::signature::{Identity, SigningKey, digest, verify_payload};
use crate::stability::{StabilityParams, boundary_curve, is_stable, linspace, min_stable_pdoom, pwd_threshold};

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub elapsed: Duration,
    /// `None` for checks with no stated time limit.
    pub budget: Option<Duration>,
}

impl fmt::Display for CheckResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} [{:>2}] {:<28} {:>8.3}s  {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.elapsed.as_secs_f64(),
            self.detail
        )
    }
}

fn timed(
    id: u8,
    name: &'static str,
    budget: Option<Duration>,
    body: impl FnOnce() -> (bool, String),
) -> CheckResult {
    let start = Instant::now();
    let (ok, mut detail) = body();
    let elapsed = start.elapsed();
    let in_time = budget.is_none_or(|b| elapsed <= b);
    if !in_time {
        detail.push_str(&format!(" (over the {:?} budget)", budget.unwrap()));
    }
    CheckResult {
        id,
        name,
        passed: ok && in_time,
        detail,
        elapsed,
        budget,
    }
}

const INSTANT: Option<Duration> = Some(Duration::from_secs(1));

pub fn check_threshold() -> CheckResult {
    timed(1, "threshold u_w=1.5 p=0.1", INSTANT, || {
        let got = pwd_threshold(1.5, 0.1).ok().and_then(|t| t.value());
        let ok = got.is_some_and(|t| (t - 0.740741).abs() <= 1e-6);
        (ok, format!("got {got:?}, want 0.740741 ± 1e-6"))
    })
}

pub fn check_threshold_low_doom() -> CheckResult {
    timed(2, "threshold u_w=1.5 p=0.05", INSTANT, || {
        let got = pwd_threshold(1.5, 0.05).ok().and_then(|t| t.value());
        let ok = got.is_some_and(|t| (t - 0.701754).abs() <= 1e-6);
        (ok, format!("got {got:?}, want 0.701754 ± 1e-6"))
    })
}

pub fn check_compensation() -> CheckResult {
    timed(3, "min p_doom u_w=2 pwd=0.75", INSTANT, || {
        let got = min_stable_pdoom(2.0, 0.75).unwrap_or(f64::NAN);
        let ok = (got - 1.0 / 3.0).abs() <= 1e-4;
        (ok, format!("got {got:.6}, want 0.3333 ± 1e-4"))
    })
}

/// `1 - (1 - p)^n` by repeated multiplication.
fn naive_detection(p: f64, n: u32) -> f64 {
    let mut none = 1.0;
    for _ in 0..n {
        none *= 1.0 - p;
    }
    1.0 - none
}

pub fn check_sampling() -> CheckResult {
    timed(4, "sampling p=0.001 n=1000", Some(Duration::from_secs(10)), || {
        let analytic = detection_probability(0.001, 1000).unwrap_or(f64::NAN);
        let naive = naive_detection(0.001, 1000);
        let scenario = BatchScenario {
            population: 1000,
            compromised: 1000,
            sampling_rate: 0.001,
            batches: vec![1000],
            customers: 1,
        };
        let mc = simulate_batch_smuggling(0x5eed, &scenario, 100_000).unwrap_or(f64::NAN);
        let ok = (analytic - 0.63230).abs() <= 1e-5
            && (analytic - naive).abs() <= 1e-12
            && (mc - analytic).abs() <= 0.01;
        (
            ok,
            format!("analytic {analytic:.5} (naive {naive:.5}), Monte Carlo {mc:.4} over 100000 trials"),
        )
    })
}

pub fn check_boundary() -> CheckResult {
    timed(5, "stability boundary pwd=0.9", Some(Duration::from_secs(1)), || {
        let pwd = 0.9;
        let u_grid = linspace(1.0, 3.0, 40);
        let p_grid = linspace(0.0, 0.9, 25);
        let Ok(curve) = boundary_curve(pwd, &u_grid) else {
            return (false, "boundary_curve rejected the grid".into());
        };
        let stable = |u: f64, p: f64| StabilityParams::new(u, p, pwd).map(|s| is_stable(&s));
        let (mut above, mut below, mut on, mut bad) = (0, 0, 0, Vec::new());
        for &(u, c) in &curve {
            // independent curve value: solve u (1 - p) pwd = 1 for p
            let oracle = (1.0 - 1.0 / (u * pwd)).max(0.0);
            if (oracle - c).abs() > 1e-12 {
                bad.push(format!("curve({u}) = {c}, expected {oracle}"));
            }
            for &p in &p_grid {
                let want = if p > c + 1e-12 {
                    above += 1;
                    true
                } else if p < c - 1e-12 {
                    below += 1;
                    false
                } else {
                    on += 1;
                    continue;
                };
                if stable(u, p) != Ok(want) {
                    bad.push(format!("(u_w={u}, p_doom={p})"));
                }
            }
            if c + 1e-6 <= 1.0 && stable(u, c + 1e-6) != Ok(true) {
                bad.push(format!("just above at u_w={u}"));
            }
            if c >= 1e-6 && stable(u, c - 1e-6) != Ok(false) {
                bad.push(format!("just below at u_w={u}"));
            }
        }
        (
            bad.is_empty(),
            format!(
                "{} grid points: {above} above, {below} below, {on} on the curve; {} mismatches {}",
                u_grid.len() * p_grid.len(),
                bad.len(),
                bad.iter().take(3).cloned().collect::<Vec<_>>().join(", ")
            ),
        )
    })
}

// ---------------------------------------------------------------------------
// Randomized protocol traces

const OUTSIDER: &str = "X";
const AUTHORITY: &str = "L";
const LANDMARK: &str = "lm";

fn pick<'a, T>(rng: &mut SimRng, xs: &'a [T]) -> &'a T {
    &xs[rng.below(xs.len() as u64) as usize]
}

fn log_uniform(rng: &mut SimRng, lo: f64, hi: f64) -> f64 {
    10f64.powf(lo + (hi - lo) * rng.next_f64())
}

fn random_class(rng: &mut SimRng) -> WorkloadClass {
    *pick(rng, &WorkloadClass::ALL)
}

fn random_grant(rng: &mut SimRng) -> CapabilityGrant {
    let mut g = CapabilityGrant::unbounded(random_class(rng));
    if rng.bernoulli(0.7) {
        g.flop_limit = Limit::Bounded(log_uniform(rng, 16.0, 25.0));
    }
    if rng.bernoulli(0.7) {
        g.cluster_size_limit = Limit::Bounded(1 + rng.below(1024));
    }
    if rng.bernoulli(0.5) {
        g.bandwidth_limit = Limit::Bounded(log_uniform(rng, 9.0, 13.0));
    }
    g.irrevocable = rng.bernoulli(0.15);
    g
}

fn random_ruleset(rng: &mut SimRng, id: u64) -> Ruleset {
    let n = rng.below(4) as usize;
    let mut r = Ruleset::new(format!("r{id}"), (0..n).map(|_| random_grant(rng)).collect());
    r.requires_license = rng.bernoulli(0.25);
    r
}

fn random_workload(rng: &mut SimRng) -> WorkloadDescriptor {
    let mut w = WorkloadDescriptor::new(
        random_class(rng),
        log_uniform(rng, 14.0, 26.0),
        1 + rng.below(2048),
        log_uniform(rng, 8.0, 14.0),
    );
    w.authorized = rng.bernoulli(0.2);
    w
}

fn random_policy(rng: &mut SimRng) -> ApproverPolicy {
    let names = ["A", "B", "C", "D"];
    let n = 1 + rng.below(4) as usize;
    let mut p = if rng.bernoulli(0.5) {
        ApproverPolicy::all_approvers(names[..n].iter().copied())
    } else {
        ApproverPolicy::threshold(1 + rng.below(n as u64) as usize, names[..n].iter().copied())
    }
    .expect("valid by construction");
    let fractions = [Fraction::strict_majority(n), Fraction::new(2, 3), Fraction::new(1, 1), Fraction::new(1, 4)];
    p = p.with_extension_fraction(*pick(rng, &fractions)).expect("valid fraction");
    if rng.bernoulli(0.5) {
        let mut b = Ruleset::default_baseline();
        b.requires_license = rng.bernoulli(0.2);
        p = p.with_baseline(b);
    }
    if rng.bernoulli(0.3) {
        p = p.with_ratchet();
    }
    if rng.bernoulli(0.7) {
        p = p.with_license_authority(AUTHORITY);
    }
    p
}

/// Does `g` admit `w`? Written out from the grant definition.
fn grant_admits(g: &CapabilityGrant, w: &WorkloadDescriptor, flop_waived: bool) -> bool {
    let within_f = |l: &Limit<f64>, v: f64| match l {
        Limit::Unbounded => true,
        Limit::Bounded(m) => v <= *m,
    };
    let within_u = |l: &Limit<u64>, v: u64| match l {
        Limit::Unbounded => true,
        Limit::Bounded(m) => v <= *m,
    };
    g.workload_class == w.workload_class
        && (flop_waived || within_f(&g.flop_limit, w.total_flop))
        && within_u(&g.cluster_size_limit, w.cluster_size)
        && within_f(&g.bandwidth_limit, w.bandwidth)
}

/// What the harness itself believes about the device, kept independently of
/// `DeviceState`.
struct Shadow {
    installed: Option<(u64, Ruleset)>,
    /// Irrevocable grants of every ruleset ever installed.
    carried: Vec<CapabilityGrant>,
    license_expiry: Option<u64>,
}

impl Shadow {
    /// Whether an Allow is consistent with the rules for `d`'s mode.
    fn permits(&self, d: &DeviceState, policy: &ApproverPolicy, w: &WorkloadDescriptor) -> Result<(), String> {
        let licensed = |required: bool| !required || self.license_expiry.is_some_and(|e| d.clock < e);
        let well_formed = w.total_flop.is_finite() && w.total_flop >= 0.0 && w.bandwidth.is_finite() && w.bandwidth >= 0.0;
        if !well_formed {
            return Err("allowed a malformed workload".into());
        }
        match d.mode {
            DeviceMode::LockedDown => Err("allowed while locked down".into()),
            DeviceMode::Active => {
                let Some((_, rs)) = &self.installed else {
                    return Err("active without firmware".into());
                };
                if d.expiry().is_none_or(|e| d.clock >= e) {
                    return Err(format!("active past expiry at clock {}", d.clock));
                }
                let waived = w.authorized && w.workload_class == WorkloadClass::Training;
                let ok = rs.grants.iter().chain(&self.carried).any(|g| grant_admits(g, w, waived));
                if !ok {
                    Err(format!("allowed {w:?} outside the installed ruleset"))
                } else if !licensed(rs.requires_license) {
                    Err("allowed without a license".into())
                } else {
                    Ok(())
                }
            }
            DeviceMode::BaselineFallback => {
                let Some(b) = &policy.baseline else {
                    return Err("fallback without a baseline".into());
                };
                if !b.grants.iter().any(|g| grant_admits(g, w, false)) {
                    Err(format!("allowed {w:?} outside the baseline after expiry"))
                } else if !licensed(b.requires_license) {
                    Err("baseline allow without a required license".into())
                } else {
                    Ok(())
                }
            }
        }
    }
}

/// Outcome of one randomized trace.
pub struct Trace {
    pub events: usize,
    pub allows: usize,
    pub installs: usize,
    pub violations: Vec<String>,
    /// Everything the honest signer devices signed.
    pub artifacts: Vec<SignedArtifact>,
}

/// Runs one trace of at most `max_events` events against a fresh device.
pub fn random_trace(seed: u64, index: u64, max_events: u64) -> Trace {
    let mut rng = SimRng::stream(seed, index);
    let policy = random_policy(&mut rng);
    let mut signer_ids: Vec<Identity> = policy.approvers.clone();
    signer_ids.push(Identity::new(OUTSIDER));
    let mut signers: Vec<SignerDevice> = signer_ids
        .iter()
        .map(|id| SignerDevice::new(SigningKey::new(id.clone())))
        .collect();

    let mut device = DeviceState::provision("dev", &policy, rng.below(50));
    if rng.bernoulli(0.4) {
        device = device.with_location(LocationConfig {
            landmarks: BTreeSet::from([Identity::new(LANDMARK)]),
            max_distance: 100.0,
            enforce: rng.bernoulli(0.7),
        });
    }
    let mut shadow = Shadow {
        installed: None,
        carried: Vec::new(),
        license_expiry: None,
    };

    let mut next_serial = 1u64;
    let mut window_end = device.clock;
    let mut artifacts: Vec<SignedArtifact> = Vec::new();
    let mut trace = Trace {
        events: 0,
        allows: 0,
        installs: 0,
        violations: Vec::new(),
        artifacts: Vec::new(),
    };

    let events = 1 + rng.below(max_events);
    for step in 0..events {
        let before = device.clone();
        let mut fail = |msg: String| trace.violations.push(format!("trace {index} step {step}: {msg}"));
        match rng.below(10) {
            0..=2 => {
                let serial = if rng.bernoulli(0.85) {
                    next_serial
                } else {
                    1 + rng.below(next_serial)
                };
                next_serial = next_serial.max(serial + 1);
                let issued_at = if rng.bernoulli(0.8) {
                    window_end.max(device.clock)
                } else {
                    device.clock
                };
                let lifetime = rng.below(60);
                let ruleset = random_ruleset(&mut rng, serial);
                let mut u = FirmwareUpdate::new(serial, serial, ruleset, lifetime, issued_at);
                let art = SignedArtifact::Update(u.clone());
                for s in signers.iter_mut() {
                    if rng.bernoulli(0.85) {
                        if let Ok((sig, next)) = s.sign_artifact(&art) {
                            u.signatures.insert(s.identity().clone(), sig);
                            *s = next;
                        }
                    }
                }
                if !u.signatures.is_empty() {
                    window_end = window_end.max(issued_at + lifetime);
                }
                artifacts.push(SignedArtifact::Update(u.clone()));
                if let Ok(next) = device.install_update(&u, &policy) {
                    trace.installs += 1;
                    let old = device.installed_serial();
                    if next.installed_serial() <= old {
                        fail(format!("install went from serial {old} to {}", next.installed_serial()));
                    }
                    if verify_update_approval(&u, &policy) != Approval::Accept {
                        fail("installed an unapproved update".into());
                    }
                    shadow.carried.extend(u.ruleset.grants.iter().filter(|g| g.irrevocable).cloned());
                    shadow.installed = Some((u.serial, u.ruleset.clone()));
                    device = next;
                }
            }
            3 => {
                let target = if rng.bernoulli(0.8) {
                    device.installed_serial()
                } else {
                    rng.below(next_serial + 1)
                };
                let expiry = device.expiry().unwrap_or(device.clock);
                let new_expiry = if rng.bernoulli(0.85) {
                    expiry + 1 + rng.below(50)
                } else {
                    expiry.saturating_sub(rng.below(5))
                };
                let mut x = ExtensionCertificate::new(next_serial, target, device.clock, new_expiry);
                next_serial += 1;
                let art = SignedArtifact::Extension(x.clone());
                for s in signers.iter_mut() {
                    if rng.bernoulli(0.7) {
                        if let Ok((sig, next)) = s.sign_artifact(&art) {
                            x.signatures.insert(s.identity().clone(), sig);
                            *s = next;
                        }
                    }
                }
                if !x.signatures.is_empty() {
                    window_end = window_end.max(new_expiry);
                }
                artifacts.push(SignedArtifact::Extension(x.clone()));
                if let Ok(next) = device.extend_lifetime(&x, &policy) {
                    let valid = x
                        .signatures
                        .iter()
                        .filter(|(id, sig)| {
                            policy.approvers.contains(id) && verify_payload(id, &x.canonical_bytes(), sig)
                        })
                        .count();
                    let needed = (policy.extension_fraction.num as usize * policy.approvers.len())
                        .div_ceil(policy.extension_fraction.den as usize);
                    if valid < needed {
                        fail(format!("extension applied with {valid} of {needed} signatures"));
                    }
                    device = next;
                }
            }
            4 | 5 => device = device.advance_clock(rng.below(40)),
            6..=8 => {
                let w = random_workload(&mut rng);
                if device.evaluate_workload(&w) == Verdict::Allow {
                    trace.allows += 1;
                    if let Err(msg) = shadow.permits(&device, &policy, &w) {
                        fail(msg);
                    }
                }
            }
            _ => {
                if rng.bernoulli(0.5) {
                    let issuer = if rng.bernoulli(0.8) { AUTHORITY } else { OUTSIDER };
                    let dur = 1 + rng.below(60);
                    if let Ok(lic) = issue_license(&SigningKey::new(issuer), &policy, "dev", dur, device.clock) {
                        if let Ok(next) = device.apply_license(&lic, &policy) {
                            shadow.license_expiry = Some(lic.expiry);
                            device = next;
                        }
                    }
                } else {
                    let resp = LandmarkResponse::signed(
                        &SigningKey::new(LANDMARK),
                        Identity::new("dev"),
                        device.clock,
                        rng.next_f64() * 150.0,
                    );
                    device = device.verify_location(&[resp]).1;
                }
            }
        }
        if before.mode == DeviceMode::LockedDown && device.mode != DeviceMode::LockedDown {
            fail(format!("left lockdown for {:?}", device.mode));
        }
        if device.installed_serial() < before.installed_serial() {
            fail("installed serial went backwards".into());
        }
        trace.events += 1;
    }
    trace.artifacts = artifacts;
    trace
}

pub fn run_traces(seed: u64, traces: u64, max_events: u64) -> Vec<Trace> {
    (0..traces)
        .into_par_iter()
        .map(|i| random_trace(seed, i, max_events))
        .collect()
}

const TRACE_SEED: u64 = 0x7ace;
const TRACE_COUNT: u64 = 10_000;
const TRACE_LEN: u64 = 100;

pub fn check_protocol_traces() -> CheckResult {
    timed(6, "protocol trace invariants", Some(Duration::from_secs(60)), || {
        let traces = run_traces(TRACE_SEED, TRACE_COUNT, TRACE_LEN);
        let events: usize = traces.iter().map(|t| t.events).sum();
        let allows: usize = traces.iter().map(|t| t.allows).sum();
        let installs: usize = traces.iter().map(|t| t.installs).sum();
        let violations: Vec<&String> = traces.iter().flat_map(|t| &t.violations).collect();
        (
            violations.is_empty() && allows > 0 && installs > 0,
            format!(
                "{} traces, {events} events, {installs} installs, {allows} allows, {} violations {}",
                traces.len(),
                violations.len(),
                violations.iter().take(2).map(|s| s.as_str()).collect::<Vec<_>>().join(" | ")
            ),
        )
    })
}

/// Every same-signer conflict, by exhaustive pairwise comparison. Returned
/// as `(first, second, signer, kind)` sorted.
pub fn pairwise_conflicts(artifacts: &[SignedArtifact]) -> Vec<(usize, usize, Identity, ConflictKind)> {
    let signed: Vec<Vec<Identity>> = artifacts
        .iter()
        .map(|a| {
            let bytes = a.canonical_bytes();
            a.signatures()
                .iter()
                .filter(|(id, sig)| verify_payload(id, &bytes, sig))
                .map(|(id, _)| id.clone())
                .collect()
        })
        .collect();
    let mut out = Vec::new();
    for i in 0..artifacts.len() {
        for j in i + 1..artifacts.len() {
            let (a, b) = (&artifacts[i], &artifacts[j]);
            let same_serial = a.serial() == b.serial();
            let differ = digest(&a.canonical_bytes()) != digest(&b.canonical_bytes());
            let (wa, wb) = (a.window(), b.window());
            // half-open windows share a tick only if the intersection is non-empty
            let overlap = wa.start.max(wb.start) < wa.end.min(wb.end);
            let kind = if same_serial && differ {
                ConflictKind::DuplicateSerial
            } else if overlap && a.designates() != b.designates() {
                ConflictKind::OverlappingWindows
            } else {
                continue;
            };
            for s in signed[i].iter().filter(|s| signed[j].contains(s)) {
                out.push((i, j, s.clone(), kind));
            }
        }
    }
    out.sort();
    out
}

/// A small artifact set from a dishonest signer pool: shared serials,
/// overlapping windows, exact duplicates and some forged signatures.
pub fn adversarial_set(seed: u64, index: u64) -> Vec<SignedArtifact> {
    let mut rng = SimRng::stream(seed, index);
    let n = 2 + rng.below(7) as usize;
    let keys = ["A", "B", "C"].map(SigningKey::new);
    let mut out: Vec<SignedArtifact> = Vec::new();
    for _ in 0..n {
        if !out.is_empty() && rng.bernoulli(0.1) {
            let dup = out[rng.below(out.len() as u64) as usize].clone();
            out.push(dup);
            continue;
        }
        let serial = 1 + rng.below(5);
        let start = rng.below(30);
        let end = start + rng.below(20);
        let mut a: SignedArtifact = if rng.bernoulli(0.6) {
            FirmwareUpdate::new(serial, rng.below(3), Ruleset::new("r", vec![]), end - start, start).into()
        } else {
            ExtensionCertificate::new(serial, 1 + rng.below(4), start, end).into()
        };
        for k in &keys {
            if rng.bernoulli(0.6) {
                a.sign_raw(k);
            }
        }
        if rng.bernoulli(0.15) {
            // forged: a signature over some other payload
            let id = pick(&mut rng, &keys).identity().clone();
            let junk = SigningKey::new(id.clone()).sign(b"something else");
            a.signatures_mut().insert(id, junk);
        }
        out.push(a);
    }
    out
}

pub fn check_equivocation() -> CheckResult {
    timed(7, "equivocation detector", Some(Duration::from_secs(30)), || {
        let traces = run_traces(TRACE_SEED, TRACE_COUNT, TRACE_LEN);
        let honest_hits: usize = traces
            .par_iter()
            .map(|t| detect_equivocation(&t.artifacts).len())
            .sum();
        let honest_artifacts: usize = traces.iter().map(|t| t.artifacts.len()).sum();

        let sets = 2000u64;
        let results: Vec<(usize, bool)> = (0..sets)
            .into_par_iter()
            .map(|i| {
                let set = adversarial_set(0xad5e, i);
                let got: Vec<_> = detect_equivocation(&set)
                    .into_iter()
                    .map(|c| (c.first, c.second, c.signer, c.kind))
                    .collect();
                let want = pairwise_conflicts(&set);
                (want.len(), got == want)
            })
            .collect();
        let mismatches = results.iter().filter(|r| !r.1).count();
        let conflicts: usize = results.iter().map(|r| r.0).sum();
        (
            honest_hits == 0 && mismatches == 0 && conflicts > 0,
            format!(
                "{honest_hits} conflicts over {honest_artifacts} honest artifacts; {mismatches} of {sets} adversarial sets differ from the pairwise oracle ({conflicts} conflicts)"
            ),
        )
    })
}

pub fn check_veto() -> CheckResult {
    timed(8, "all-approvers veto", INSTANT, || {
        let ids = ["A", "B", "C"];
        let Ok(policy) = ApproverPolicy::all_approvers(ids) else {
            return (false, "policy rejected".into());
        };
        let base = FirmwareUpdate::new(1, 1, Ruleset::new("r", vec![]), 10, 0);
        let mut wrong = Vec::new();
        for mask in 0u8..8 {
            let mut u = base.clone();
            for (bit, id) in ids.iter().enumerate() {
                if mask & (1 << bit) != 0 {
                    u.sign_raw(&SigningKey::new(*id));
                }
            }
            let accepted = verify_update_approval(&u, &policy).is_accept();
            if accepted != (mask == 0b111) {
                wrong.push(mask);
            }
        }
        (wrong.is_empty(), format!("8 subsets, misclassified {wrong:?}"))
    })
}

pub fn check_assignment() -> CheckResult {
    timed(9, "hypergeometric assignment", Some(Duration::from_secs(10)), || {
        // exhaustive: every 5-subset of 10 devices as customer 0's share
        let (mut total, mut hits) = (0u32, 0u32);
        for mask in 0u32..1 << 10 {
            if mask.count_ones() == 5 {
                total += 1;
                if mask & 0b111 == 0b111 {
                    hits += 1;
                }
            }
        }
        let exact = hits as f64 / total as f64;
        let closed = all_captured_probability(10, 3, 5);

        let trials = 100_000u64;
        let devices: Vec<u8> = (0..10).collect();
        let caught: u64 = (0..trials)
            .into_par_iter()
            .map(|t| {
                let mut rng = SimRng::stream(0xa551, t);
                let shares = assign_randomly(&mut rng, &devices, 2).expect("two customers");
                u64::from([0u8, 1, 2].iter().all(|d| shares[0].contains(d)))
            })
            .sum();
        let mc = caught as f64 / trials as f64;
        let sigma = (exact * (1.0 - exact) / trials as f64).sqrt();
        let ok = hits == 21
            && total == 252
            && (exact - 1.0 / 12.0).abs() < 1e-15
            && (closed - exact).abs() < 1e-15
            && (mc - exact).abs() <= 3.0 * sigma;
        (
            ok,
            format!("enumeration {hits}/{total}, closed form {closed:.6}, Monte Carlo {mc:.5} (3σ = {:.5})", 3.0 * sigma),
        )
    })
}

/// The composed scenario used for the determinism check.
pub const DETERMINISM_SCENARIO: &str = include_str!("../../../fixtures/scenarios/full.json");

pub fn check_determinism() -> CheckResult {
    timed(10, "report determinism", Some(Duration::from_secs(10)), || {
        let cfg = match parse_config(DETERMINISM_SCENARIO) {
            Ok(c) => c,
            Err(e) => return (false, format!("fixture does not parse: {e}")),
        };
        let base = std::env::temp_dir().join(format!("heglab-determinism-{}", std::process::id()));
        let dirs: Vec<PathBuf> = ["a", "b"].iter().map(|d| base.join(d)).collect();
        let mut outputs = Vec::new();
        for dir in &dirs {
            match emit_report(&run_scenario(&cfg), dir, &[Format::Csv, Format::Json]) {
                Ok(files) => outputs.push(
                    files
                        .iter()
                        .map(|f| (f.file_name().map(|n| n.to_owned()), fs::read(f).ok()))
                        .collect::<Vec<_>>(),
                ),
                Err(e) => return (false, e.to_string()),
            }
        }
        let _ = fs::remove_dir_all(&base);
        let same = outputs[0] == outputs[1] && outputs[0].iter().all(|(_, b)| b.is_some());
        (same, format!("{} files compared byte for byte", outputs[0].len()))
    })
}

/// Every check, in order.
pub fn run_all() -> Vec<CheckResult> {
    vec![
        check_threshold(),
        check_threshold_low_doom(),
        check_compensation(),
        check_sampling(),
        check_boundary(),
        check_protocol_traces(),
        check_equivocation(),
        check_veto(),
        check_assignment(),
        check_determinism(),
    ]
}
