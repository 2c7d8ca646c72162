//! Out-of-process algorithms speaking line-delimited JSON over stdin/stdout.
//!
//! ```text
//! adversary -> algo  {"type":"hello","n":2,"epsilon":"1/4"}
//! adversary -> algo  {"type":"chore","index":1,"costs":["16/289","4"]}
//! algo -> adversary  {"type":"assign","agent":2}
//! adversary -> algo  {"type":"end","verdict":{...}}
//! ```
//!
//! The command is run through `sh -c`. Every chore must be answered, in
//! order, within the configured timeout.

use std::io::{self, BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::algorithms::{DecisionContext, Policy, PolicyError};
use crate::model::Verdict;
use crate::rat::Rat;
use crate::transcript_file::VerdictRecord;

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(10);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum WireMessage {
    Hello { n: usize, epsilon: Rat },
    Chore { index: usize, costs: Vec<Rat> },
    Assign { agent: usize },
    End { verdict: Option<VerdictRecord> },
}

impl WireMessage {
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("wire messages always serialize")
    }
}

struct Session {
    child: Child,
    stdin: Option<ChildStdin>,
    replies: Receiver<io::Result<String>>,
}

pub struct ExternalPolicy {
    command: String,
    timeout: Duration,
    session: Option<Session>,
}

pub fn external_policy(command: &str) -> ExternalPolicy {
    ExternalPolicy::new(command, DEFAULT_TIMEOUT)
}

impl ExternalPolicy {
    pub fn new(command: &str, timeout: Duration) -> Self {
        ExternalPolicy {
            command: command.to_string(),
            timeout,
            session: None,
        }
    }

    fn send(&mut self, message: &WireMessage) -> Result<(), PolicyError> {
        let session = self
            .session
            .as_mut()
            .ok_or_else(|| PolicyError::Protocol("process not started".into()))?;
        let stdin = session
            .stdin
            .as_mut()
            .ok_or_else(|| PolicyError::Protocol("stdin closed".into()))?;
        writeln!(stdin, "{}", message.to_line())
            .and_then(|_| stdin.flush())
            .map_err(|e| PolicyError::Protocol(format!("cannot write to process: {e}")))
    }

    fn receive(&mut self) -> Result<WireMessage, PolicyError> {
        let session = self
            .session
            .as_mut()
            .ok_or_else(|| PolicyError::Protocol("process not started".into()))?;
        let line = match session.replies.recv_timeout(self.timeout) {
            Ok(Ok(line)) => line,
            Ok(Err(e)) => return Err(PolicyError::Protocol(format!("cannot read from process: {e}"))),
            Err(RecvTimeoutError::Timeout) => return Err(PolicyError::Timeout(self.timeout.as_millis())),
            Err(RecvTimeoutError::Disconnected) => {
                return Err(PolicyError::Protocol("process closed its output".into()))
            }
        };
        serde_json::from_str(&line).map_err(|e| PolicyError::Protocol(format!("malformed reply {line:?}: {e}")))
    }

    fn shutdown(&mut self) {
        let Some(mut session) = self.session.take() else { return };
        drop(session.stdin.take());
        let deadline = Instant::now() + Duration::from_millis(500);
        while Instant::now() < deadline {
            if let Ok(Some(_)) = session.child.try_wait() {
                return;
            }
            thread::sleep(Duration::from_millis(10));
        }
        let _ = session.child.kill();
        let _ = session.child.wait();
    }
}

impl Policy for ExternalPolicy {
    fn name(&self) -> String {
        format!("external:{}", self.command)
    }

    fn start(&mut self, n: usize, epsilon: &Rat) -> Result<(), PolicyError> {
        self.shutdown();
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(&self.command)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| PolicyError::Protocol(format!("cannot spawn `{}`: {e}", self.command)))?;
        let stdin = child.stdin.take();
        let stdout = child
            .stdout
            .take()
            .ok_or_else(|| PolicyError::Protocol("process stdout unavailable".into()))?;
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                let failed = line.is_err();
                if tx.send(line).is_err() || failed {
                    break;
                }
            }
        });
        self.session = Some(Session {
            child,
            stdin,
            replies: rx,
        });
        self.send(&WireMessage::Hello {
            n,
            epsilon: epsilon.clone(),
        })
    }

    fn decide(&mut self, ctx: &DecisionContext<'_>) -> Result<usize, PolicyError> {
        let index = ctx.history.m() + 1;
        self.send(&WireMessage::Chore {
            index,
            costs: ctx.chore.as_slice().to_vec(),
        })?;
        match self.receive()? {
            WireMessage::Assign { agent } => Ok(agent),
            other => Err(PolicyError::Protocol(format!(
                "expected an assign message, got {}",
                other.to_line()
            ))),
        }
    }

    fn finish(&mut self, verdict: Option<&Verdict>) {
        let _ = self.send(&WireMessage::End {
            verdict: verdict.map(VerdictRecord::from),
        });
        self.shutdown();
    }
}

impl Drop for ExternalPolicy {
    fn drop(&mut self) {
        self.shutdown();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ChoreCosts, Transcript};

    #[test]
    fn wire_format_is_stable() {
        let hello = WireMessage::Hello {
            n: 2,
            epsilon: Rat::new(1, 4),
        };
        assert_eq!(hello.to_line(), r#"{"type":"hello","n":2,"epsilon":"1/4"}"#);
        let chore = WireMessage::Chore {
            index: 1,
            costs: vec![Rat::new(16, 289), Rat::from_integer(4)],
        };
        assert_eq!(chore.to_line(), r#"{"type":"chore","index":1,"costs":["16/289","4"]}"#);
        let reply: WireMessage = serde_json::from_str(r#"{"type":"assign","agent":2}"#).unwrap();
        assert_eq!(reply, WireMessage::Assign { agent: 2 });
        assert_eq!(
            WireMessage::End { verdict: None }.to_line(),
            r#"{"type":"end","verdict":null}"#
        );
    }

    fn ask(policy: &mut ExternalPolicy) -> Result<usize, PolicyError> {
        let t = Transcript::new(2, Rat::new(1, 4), Rat::one(), "x").unwrap();
        let c = ChoreCosts::new(vec![Rat::one(), Rat::one()]);
        policy.start(2, &Rat::new(1, 4))?;
        policy.decide(&DecisionContext {
            history: &t,
            chore: &c,
            adversary: None,
        })
    }

    #[test]
    fn replies_are_passed_through() {
        let script =
            r#"while read line; do case "$line" in *'"chore"'*) echo '{"type":"assign","agent":7}';; esac; done"#;
        let mut p = external_policy(script);
        assert_eq!(ask(&mut p), Ok(7));
        p.finish(None);
    }

    #[test]
    fn malformed_reply_is_a_protocol_error() {
        let mut p = external_policy(r#"while read line; do echo 'nonsense'; done"#);
        assert!(matches!(ask(&mut p), Err(PolicyError::Protocol(_))));
    }

    #[test]
    fn silent_process_times_out() {
        let mut p = ExternalPolicy::new("sleep 5", Duration::from_millis(100));
        assert_eq!(ask(&mut p), Err(PolicyError::Timeout(100)));
    }

    #[test]
    fn exited_process_is_a_protocol_error() {
        let mut p = external_policy("true");
        assert!(matches!(ask(&mut p), Err(PolicyError::Protocol(_))));
    }
}
