use std::io::{Read, Write};
use std::os::unix::process::CommandExt;
use std::process::{Child, Command, Stdio};
use std::thread;
use std::time::Duration;

use wait_timeout::ChildExt;

use crate::error::{Error, Result};
use crate::sequence::AntibodySequence;

/// Shell command that reads `heavy<TAB>light\n` on stdin and prints one
/// ΔΔG value on stdout.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulatorClientSpec {
    pub command: String,
    pub timeout: Duration,
    pub retries: usize,
}

impl SimulatorClientSpec {
    pub fn validate(&self) -> Result<()> {
        if self.command.trim().is_empty() {
            return Err(Error::Config("simulator command is empty".into()));
        }
        if self.timeout.is_zero() {
            return Err(Error::Config("simulator timeout must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SimulatorClient {
    spec: SimulatorClientSpec,
}

impl SimulatorClient {
    pub fn new(spec: SimulatorClientSpec) -> Result<Self> {
        spec.validate()?;
        Ok(SimulatorClient { spec })
    }

    pub fn spec(&self) -> &SimulatorClientSpec {
        &self.spec
    }

    pub fn query(&self, seq: &AntibodySequence) -> Result<f64> {
        query_external(seq, &self.spec)
    }
}

enum Failure {
    Spawn(String),
    Exit(String),
    Timeout,
    Parse,
}

fn kill_group(child: &mut Child) {
    // The child leads its own process group, so this also reaches anything
    // the shell started.
    let pid = child.id() as libc::pid_t;
    unsafe {
        libc::kill(-pid, libc::SIGKILL);
    }
    let _ = child.kill();
    let _ = child.wait();
}

fn run_once(seq: &AntibodySequence, spec: &SimulatorClientSpec) -> (Result<f64, Failure>, String) {
    let spawned = Command::new("sh")
        .arg("-c")
        .arg(&spec.command)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .process_group(0)
        .spawn();
    let mut child = match spawned {
        Ok(c) => c,
        Err(e) => return (Err(Failure::Spawn(e.to_string())), String::new()),
    };
    let input = format!("{}\t{}\n", seq.heavy(), seq.light());
    let mut stdin = child.stdin.take().expect("stdin is piped");
    let writer = thread::spawn(move || {
        // A command that ignores its input may close the pipe early.
        let _ = stdin.write_all(input.as_bytes());
    });
    let drain = |mut r: Box<dyn Read + Send>| {
        thread::spawn(move || {
            let mut buf = Vec::new();
            let _ = r.read_to_end(&mut buf);
            String::from_utf8_lossy(&buf).into_owned()
        })
    };
    let out = drain(Box::new(child.stdout.take().expect("stdout is piped")));
    let err = drain(Box::new(child.stderr.take().expect("stderr is piped")));

    let status = match child.wait_timeout(spec.timeout) {
        Ok(Some(status)) => Some(status),
        Ok(None) => {
            kill_group(&mut child);
            None
        }
        Err(e) => {
            kill_group(&mut child);
            let _ = writer.join();
            return (Err(Failure::Spawn(e.to_string())), String::new());
        }
    };
    let _ = writer.join();
    let stdout = out.join().unwrap_or_default();
    let stderr = err.join().unwrap_or_default();
    let output = if stderr.is_empty() {
        stdout.clone()
    } else {
        format!("{stdout}{stderr}")
    };
    let result = match status {
        None => Err(Failure::Timeout),
        Some(s) if !s.success() => Err(Failure::Exit(s.to_string())),
        Some(_) => match stdout.trim().parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(Failure::Parse),
        },
    };
    (result, output)
}

/// Runs the simulator command once per attempt until it succeeds or
/// `retries + 1` attempts have failed.
pub fn query_external(seq: &AntibodySequence, spec: &SimulatorClientSpec) -> Result<f64> {
    spec.validate()?;
    let attempts = spec.retries + 1;
    let mut last = (String::new(), String::new());
    for _ in 0..attempts {
        let (result, output) = run_once(seq, spec);
        let message = match result {
            Ok(v) => return Ok(v),
            Err(Failure::Spawn(e)) => format!("could not run command: {e}"),
            Err(Failure::Exit(status)) => format!("command failed with {status}"),
            Err(Failure::Timeout) => format!("timed out after {:?}", spec.timeout),
            Err(Failure::Parse) => "output is not a single number".to_string(),
        };
        last = (message, output);
    }
    Err(Error::Simulator {
        attempts,
        message: last.0,
        output: last.1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sequence::Alphabet;
    use std::time::Instant;

    fn seq() -> AntibodySequence {
        AntibodySequence::parse("EVQ", "DIQ", &Alphabet::standard()).unwrap()
    }

    fn spec(command: &str, timeout_ms: u64, retries: usize) -> SimulatorClientSpec {
        SimulatorClientSpec {
            command: command.into(),
            timeout: Duration::from_millis(timeout_ms),
            retries,
        }
    }

    #[test]
    fn echo_stub() {
        assert_eq!(query_external(&seq(), &spec("echo 0.0", 5000, 0)).unwrap(), 0.0);
        assert_eq!(query_external(&seq(), &spec("echo ' -1.5 '", 5000, 0)).unwrap(), -1.5);
    }

    #[test]
    fn receives_tab_separated_chains() {
        let cmd = r#"read h l; [ "$h" = EVQ ] && [ "$l" = DIQ ] && echo 2.5"#;
        assert_eq!(query_external(&seq(), &spec(cmd, 5000, 0)).unwrap(), 2.5);
    }

    #[test]
    fn unparsable_output_is_reported() {
        let err = query_external(&seq(), &spec("echo abc", 5000, 1)).unwrap_err();
        match err {
            Error::Simulator { attempts, output, .. } => {
                assert_eq!(attempts, 2);
                assert!(output.contains("abc"));
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn nonzero_exit_fails() {
        let err = query_external(&seq(), &spec("echo 1.0; exit 3", 5000, 0)).unwrap_err();
        assert!(err.to_string().contains("exit"), "{err}");
    }

    #[test]
    fn timeout_bounds_wall_time() {
        let start = Instant::now();
        let err = query_external(&seq(), &spec("sleep 5; echo 1", 200, 1)).unwrap_err();
        assert!(err.to_string().contains("timed out"), "{err}");
        assert!(start.elapsed() < Duration::from_secs(3), "{:?}", start.elapsed());
    }

    #[test]
    fn retry_recovers_from_transient_failure() {
        let dir = tempfile::tempdir().unwrap();
        let flag = dir.path().join("flag");
        let cmd = format!(
            "if [ -e {0} ]; then echo -3.25; else touch {0}; exit 1; fi",
            flag.display()
        );
        assert_eq!(query_external(&seq(), &spec(&cmd, 5000, 1)).unwrap(), -3.25);
    }
}
