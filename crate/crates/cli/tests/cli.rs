use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use delay_noether::problem::Problem;
use delay_noether::problem_file::parse_problem;
use delay_noether::solver::{solve, SolveConfig};
use delay_noether::verify::reduce_to_control;
use tempfile::TempDir;

fn problems() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../problems")
}

fn fixture(name: &str) -> PathBuf {
    problems().join(name)
}

fn run<I, S>(args: I) -> Output
where
    I: IntoIterator<Item = S>,
    S: AsRef<std::ffi::OsStr>,
{
    Command::new(env!("CARGO_BIN_EXE_delay-noether")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let path = dir.path().join(name);
    std::fs::write(&path, text).unwrap();
    path
}

/// One-dimensional variational problem on [0, 1] with delay 1/2.
fn variational_file(lagrangian: &str, generators: &str) -> String {
    format!(
        "[problem]\nkind = \"variational\"\nn = 1\ntau = 0.5\nt1 = 0\nt2 = 1\n\n\
         [lagrangian]\nexpr = \"{lagrangian}\"\n\n\
         [prehistory]\nq1 = [{{ from = -0.5, to = 0, expr = \"0\" }}]\n\n\
         [terminal]\nq1 = 1\n\n{generators}"
    )
}

fn assert_error_line(o: &Output, category: &str) {
    let err = stderr(o);
    let line = err.lines().next().unwrap_or("");
    assert!(line.starts_with(&format!("error: {category}: ")), "stderr: {err}");
    assert_eq!(err.lines().count(), 1, "stderr: {err}");
}

#[test]
fn derive_prints_the_two_interval_system() {
    let o = run(["derive".as_ref(), fixture("example1.toml").as_os_str()]);
    assert!(o.status.success());
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "euler-lagrange q1 inner [t1, t2-tau]: 4*ddq1 + 2*ddq1_tau + 2*ddq1_adv = 0");
    assert_eq!(lines[1], "euler-lagrange q1 outer [t2-tau, t2]: 2*ddq1 + 2*ddq1_tau = 0");
    assert!(lines[2].starts_with("dubois-reymond inner [t1, t2-tau]: "));
    assert!(lines[3].starts_with("dubois-reymond outer [t2-tau, t2]: "));
    assert_eq!(lines.len(), 4);
}

#[test]
fn derive_renders_the_hamiltonian_system_for_control_problems() {
    let o = run(["derive".as_ref(), fixture("delayed_control.toml").as_os_str()]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.starts_with("hamiltonian: H = "));
    for label in ["state q1", "costate p1", "stationary u1"] {
        assert!(text.contains(&format!("{label} inner [t1, t2-tau]: ")), "{text}");
        assert!(text.contains(&format!("{label} outer [t2-tau, t2]: ")), "{text}");
    }
    assert!(text.contains("stationary u1 outer [t2-tau, t2]: 2*u1 + p1 = 0"), "{text}");
}

#[test]
fn invariance_exit_codes_follow_the_verdict() {
    let o = run(["invariance".as_ref(), fixture("example1.toml").as_os_str()]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "Invariant (symbolic)\n");

    // time translation against an explicit 1e-9·t: the integrand is 1e-9
    let dir = TempDir::new().unwrap();
    let file = write(
        &dir,
        "tilted.toml",
        &variational_file("dq1^2 + t/1000000000", "[generators]\neta = \"1\"\nxi1 = \"0\"\n"),
    );
    let o = run(["invariance".as_ref(), file.as_os_str(), "--tol".as_ref(), "5e-10".as_ref()]);
    assert_eq!(o.status.code(), Some(2), "{}", stdout(&o));
    assert!(stdout(&o).starts_with("Inconclusive (sampled)\n"));
    let o = run(["invariance".as_ref(), file.as_os_str(), "--tol".as_ref(), "1e-12".as_ref()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).starts_with("NotInvariant (sampled)\n"));
    assert!(stdout(&o).contains("sampled_max_residual=1.0000000000000001e-9"), "{}", stdout(&o));
}

#[test]
fn charge_prints_both_pieces() {
    let o = run(["charge".as_ref(), fixture("example1.toml").as_os_str()]);
    assert!(o.status.success());
    assert_eq!(
        stdout(&o),
        "inner [t1, t2-tau]: C = -2*dq1*dq1_adv - 3*dq1^2 + dq1_tau^2\n\
         outer [t2-tau, t2]: C = -dq1^2 + dq1_tau^2\n"
    );
    let o = run(["charge".as_ref(), fixture("delayed_control.toml").as_os_str()]);
    assert!(o.status.success());
    assert!(stdout(&o).starts_with("whole [t1, t2]: C = "));
}

#[test]
fn solve_writes_the_trajectory_csv() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("traj.csv");
    let o = run([
        "solve".as_ref(),
        fixture("example1.toml").as_os_str(),
        "--h".as_ref(),
        "0.01".as_ref(),
        "--out".as_ref(),
        out.as_os_str(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let summary = stdout(&o);
    assert!(summary.contains("converged: true\n"));
    assert!(summary.contains("nodes: 401\n"));
    let csv = std::fs::read_to_string(&out).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("t,q1"));
    let rows: Vec<(f64, f64)> = lines
        .map(|l| {
            let (t, q) = l.split_once(',').unwrap();
            // 17 significant digits: one before the point, sixteen after
            let mantissa = q.split('e').next().unwrap().trim_start_matches('-');
            assert_eq!(mantissa.len(), 18, "{l}");
            (t.parse().unwrap(), q.parse().unwrap())
        })
        .collect();
    assert_eq!(rows.len(), 401);
    assert_eq!(rows[0], (-1.0, 1.0));
    let (t_end, q_end) = rows[400];
    assert_eq!(t_end, 3.0);
    assert!((q_end - 2.0).abs() < 1e-12);
    // the exact minimiser has slope 3/2 on (0, 1)
    assert!((rows[150].1 - 0.75).abs() < 1e-8, "{:?}", rows[150]);
}

#[test]
fn identical_inputs_give_identical_bytes() {
    let dir = TempDir::new().unwrap();
    let mut outputs = Vec::new();
    for name in ["a.csv", "b.csv"] {
        let out = dir.path().join(name);
        let o = run([
            "verify".as_ref(),
            fixture("oscillator.toml").as_os_str(),
            "--h".as_ref(),
            "0.01".as_ref(),
            "--out".as_ref(),
            out.as_os_str(),
        ]);
        let text = stdout(&o).replace(name, "");
        outputs.push((text, std::fs::read(&out).unwrap()));
    }
    assert_eq!(outputs[0], outputs[1]);
    let a = run(["invariance".as_ref(), fixture("delayed_control.toml").as_os_str(), "--seed".as_ref(), "7".as_ref()]);
    let b = run(["invariance".as_ref(), fixture("delayed_control.toml").as_os_str(), "--seed".as_ref(), "7".as_ref()]);
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn solve_then_verify_a_smooth_extremal() {
    let dir = TempDir::new().unwrap();
    let traj = dir.path().join("traj.csv");
    let charge = dir.path().join("charge.csv");
    let residuals = dir.path().join("residuals.csv");
    let o = run(["solve".as_ref(), fixture("oscillator.toml").as_os_str(), "--out".as_ref(), traj.as_os_str()]);
    assert!(o.status.success());
    let o = run([
        "verify".as_ref(),
        fixture("oscillator.toml").as_os_str(),
        "--traj".as_ref(),
        traj.as_os_str(),
        "--tol".as_ref(),
        "1e-4".as_ref(),
        "--out".as_ref(),
        charge.as_os_str(),
        "--residuals-out".as_ref(),
        residuals.as_os_str(),
    ]);
    let text = stdout(&o);
    assert_eq!(o.status.code(), Some(0), "{text}");
    assert!(text.contains("invariance: Invariant (symbolic)\n"));
    assert!(text.ends_with("result: PASS\n"));

    let csv = std::fs::read_to_string(&charge).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("t,charge_value,piece"));
    let pieces: Vec<&str> = lines.map(|l| l.rsplit(',').next().unwrap()).collect();
    assert!(pieces.contains(&"inner") && pieces.contains(&"outer"));
    assert!(pieces.iter().all(|p| *p == "inner" || *p == "outer"));

    let csv = std::fs::read_to_string(&residuals).unwrap();
    assert!(csv.starts_with("t,piece,residual,value\n"));
    assert!(csv.contains(",inner,euler-lagrange q1,"));
    assert!(csv.contains(",outer,dubois-reymond,"));

    // an absurdly tight tolerance fails with exit code 1
    let o = run([
        "verify".as_ref(),
        fixture("oscillator.toml").as_os_str(),
        "--traj".as_ref(),
        traj.as_os_str(),
        "--tol".as_ref(),
        "1e-15".as_ref(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).ends_with("result: FAIL\n"));
}

#[test]
fn example1_inner_charge_jumps_at_the_first_delay_multiple() {
    let dir = TempDir::new().unwrap();
    let charge = dir.path().join("charge.csv");
    let o = run(["verify".as_ref(), fixture("example1.toml").as_os_str(), "--out".as_ref(), charge.as_os_str()]);
    let text = stdout(&o);
    assert_eq!(o.status.code(), Some(1), "{text}");
    assert!(text.contains("charge outer [t2-tau, t2]: mean -1.7"), "{text}");
    let csv = std::fs::read_to_string(&charge).unwrap();
    let inner: Vec<(f64, f64)> = csv
        .lines()
        .skip(1)
        .filter(|l| l.ends_with(",inner"))
        .map(|l| {
            let mut f = l.split(',');
            (f.next().unwrap().parse().unwrap(), f.next().unwrap().parse().unwrap())
        })
        .collect();
    let near = |t0: f64| inner.iter().find(|(t, _)| (t - t0).abs() < 1e-9).unwrap().1;
    assert!((near(0.5) + 1.25).abs() < 1e-8);
    assert!((near(1.5) - 1.5).abs() < 1e-8);
}

const REDUCED_OSCILLATOR: &str = "[problem]
kind = \"control\"
n = 1
m = 1
tau = 0.5
t1 = 0
t2 = 1

[lagrangian]
expr = \"u1^2/2 - q1^2/2\"

[dynamics]
q1 = \"u1\"

[prehistory]
q1 = [{ from = -0.5, to = 0, expr = \"0\" }]

[generators]
eta = \"1\"
xi1 = \"0\"
rho1 = \"0\"
sigma1 = \"0\"
";

#[test]
fn control_problems_are_verified_against_a_supplied_trajectory() {
    let Problem::Variational(p) = parse_problem(include_str!("../../../problems/oscillator.toml")).unwrap().problem
    else {
        panic!("variational fixture")
    };
    let solved = solve(&p, &SolveConfig::default()).unwrap();
    let (_, reduced) = reduce_to_control(&p, &solved.trajectory).unwrap();
    let grid = reduced.grid();
    let mut csv = String::from("t,q1,u1,p1\n");
    for j in 0..=grid.last() {
        let p = reduced.costate(j).map_or(String::new(), |p| format!("{:.16e}", p[0]));
        let u = reduced.controls().unwrap()[j][0];
        csv.push_str(&format!("{:.16e},{:.16e},{:.16e},{p}\n", grid.time(j), reduced.state(j)[0], u));
    }
    let dir = TempDir::new().unwrap();
    let file = write(&dir, "reduced.toml", REDUCED_OSCILLATOR);
    let traj = write(&dir, "traj.csv", &csv);

    let o = run(["verify".as_ref(), file.as_os_str(), "--traj".as_ref(), traj.as_os_str()]);
    let text = stdout(&o);
    assert_eq!(o.status.code(), Some(0), "{text}{}", stderr(&o));
    assert!(text.contains("charge whole [t1, t2]: "), "{text}");
    assert!(text.contains("dh-dt whole [t1, t2]: "), "{text}");
    assert!(text.contains("residual stationary u1 inner [t1, t2-tau]: "), "{text}");

    // without a trajectory a control problem cannot be verified
    let o = run(["verify".as_ref(), file.as_os_str()]);
    assert_eq!(o.status.code(), Some(3));
    assert_error_line(&o, "invalid");
}

#[test]
fn errors_are_single_machine_readable_lines() {
    let dir = TempDir::new().unwrap();
    let bad_exponent = write(&dir, "exp.toml", &variational_file("dq1 ^ q1", ""));
    let o = run(["derive".as_ref(), bad_exponent.as_os_str()]);
    assert_eq!(o.status.code(), Some(3));
    assert_error_line(&o, "syntax");
    assert!(stderr(&o).contains("line "), "{}", stderr(&o));

    let unknown = write(&dir, "unknown.toml", &variational_file("dq1^2 + z1", ""));
    let o = run(["derive".as_ref(), unknown.as_os_str()]);
    assert_eq!(o.status.code(), Some(3));
    assert_error_line(&o, "unknown-identifier");

    let long_delay = write(&dir, "tau.toml", &variational_file("dq1^2", "").replace("tau = 0.5", "tau = 5"));
    let o = run(["derive".as_ref(), long_delay.as_os_str()]);
    assert_eq!(o.status.code(), Some(3));
    assert_error_line(&o, "invalid");

    let plain = write(&dir, "plain.toml", &variational_file("dq1^2", ""));
    let o = run(["charge".as_ref(), plain.as_os_str()]);
    assert_eq!(o.status.code(), Some(3));
    assert_error_line(&o, "invalid");

    let o = run(["solve".as_ref(), plain.as_os_str(), "--h".as_ref(), "0.3".as_ref()]);
    assert_eq!(o.status.code(), Some(3));
    assert_error_line(&o, "invalid");

    let o = run(["solve".as_ref(), fixture("delayed_control.toml").as_os_str()]);
    assert_eq!(o.status.code(), Some(3));
    assert_error_line(&o, "invalid");

    let o = run(["derive".as_ref(), dir.path().join("missing.toml").as_os_str()]);
    assert_eq!(o.status.code(), Some(3));
    assert_error_line(&o, "io");

    let o = run(["transmogrify"]);
    assert_eq!(o.status.code(), Some(64));
    assert_error_line(&o, "usage");

    let o = run(["solve".as_ref(), plain.as_os_str(), "--h".as_ref(), "small".as_ref()]);
    assert_eq!(o.status.code(), Some(64));
    assert_error_line(&o, "usage");
}

#[test]
fn verify_without_generators_only_reports_residuals() {
    let dir = TempDir::new().unwrap();
    let plain = write(&dir, "plain.toml", &variational_file("dq1^2", ""));
    let o = run(["verify".as_ref(), plain.as_os_str()]);
    let text = stdout(&o);
    assert_eq!(o.status.code(), Some(0), "{text}");
    assert!(text.contains("charge: none (no [generators] section)\n"));
    assert!(text.contains("residual euler-lagrange q1 inner [t1, t2-tau]: "));
}

#[test]
fn malformed_trajectory_files_are_rejected() {
    let dir = TempDir::new().unwrap();
    let bad_times = write(&dir, "t.csv", "t,q1\n-0.5,0\n0.1,0\n0.5,0\n1,1\n");
    let o = run(["verify".as_ref(), fixture("oscillator.toml").as_os_str(), "--traj".as_ref(), bad_times.as_os_str()]);
    assert_eq!(o.status.code(), Some(3));
    assert_error_line(&o, "invalid");

    let not_numbers = write(&dir, "n.csv", "t,q1\n-0.5,0\n0,zero\n");
    let o =
        run(["verify".as_ref(), fixture("oscillator.toml").as_os_str(), "--traj".as_ref(), not_numbers.as_os_str()]);
    assert_eq!(o.status.code(), Some(3));
    assert_error_line(&o, "syntax");

    let missing = write(&dir, "m.csv", "t,x\n-0.5,0\n");
    let o = run(["verify".as_ref(), fixture("oscillator.toml").as_os_str(), "--traj".as_ref(), missing.as_os_str()]);
    assert_eq!(o.status.code(), Some(3));
    assert_error_line(&o, "invalid");
}
