//! Lockstep wire protocol between the trainer (client) and an environment
//! server.
//!
//! The server speaks first with `hello`. Each episode is `reset` answered by
//! an `obs`, then `act`/`obs` pairs until an `obs` carries `done: true`.
//! `close` ends the session. See `docs/protocol.md` for the grammar.

use std::io::{BufRead, BufReader, Write};
use std::net::{TcpListener, TcpStream, ToSocketAddrs};
use std::process::{Child, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::time::Duration;

use crate::env::{EnvError, EnvObservation, EnvSpec, Environment, EpisodeWindow};
use crate::problem::{Action, ActionKind, ActionSpec};

pub mod codec;

pub use codec::{decode, encode, DecodeError, Message, PROTOCOL_VERSION};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);

/// How a served session ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SessionEnd {
    Closed,
    Disconnected,
    Malformed,
    Failed,
}

fn send<W: Write>(out: &mut W, message: &Message) -> std::io::Result<()> {
    out.write_all(encode(message).as_bytes())?;
    out.write_all(b"\n")?;
    out.flush()
}

fn obs_message(o: EnvObservation) -> Message {
    Message::Obs {
        timestamp: o.time,
        features: o.features,
        cooling_w: o.cooling_w,
        baseline_w: o.baseline_w,
        done: o.done,
    }
}

/// Turns wire action values into an action of `spec`'s kind.
pub fn action_from_values(values: &[f64], spec: &ActionSpec) -> Result<Action, String> {
    let [v] = values else {
        return Err(format!("expected one action value, got {}", values.len()));
    };
    match spec.kind {
        ActionKind::DiscreteDelta => {
            if v.fract() == 0.0 && *v >= 0.0 && (*v as usize) < spec.n_discrete() {
                Ok(Action::Discrete(*v as usize))
            } else {
                Err(format!("{v} is not a discrete action index below {}", spec.n_discrete()))
            }
        }
        ActionKind::ContinuousDelta => Ok(Action::Continuous(*v)),
    }
}

/// Serves one session on `input`/`output`. Bad actions and out-of-order
/// requests are answered with an error and the session continues;
/// unparseable lines and simulator failures end it.
pub fn serve<R: BufRead, W: Write>(
    env: &mut dyn Environment,
    input: R,
    mut output: W,
) -> std::io::Result<SessionEnd> {
    let spec = env.spec();
    send(
        &mut output,
        &Message::Hello {
            features: spec.features.clone(),
            action: spec.action,
        },
    )?;
    let mut in_episode = false;
    for line in input.lines() {
        let line = line?;
        let message = match decode(&line) {
            Ok(m) => m,
            Err(e) => {
                send(&mut output, &Message::error(e.code(), e.to_string()))?;
                if e.recoverable() {
                    continue;
                }
                return Ok(SessionEnd::Malformed);
            }
        };
        let reply = match message {
            Message::Close => return Ok(SessionEnd::Closed),
            Message::Reset { seed, start, end } => match env.reset(&EpisodeWindow { seed, start, end }) {
                Ok(o) => {
                    in_episode = !o.done;
                    obs_message(o)
                }
                Err(EnvError::Window(m)) => Message::error(codec::code::BAD_WINDOW, m),
                Err(e) => {
                    send(&mut output, &Message::error(codec::code::SIM_ERROR, e.to_string()))?;
                    return Ok(SessionEnd::Failed);
                }
            },
            Message::Act { action } => {
                if !in_episode {
                    Message::error(codec::code::NOT_RESET, "act before reset")
                } else {
                    match action_from_values(&action, &spec.action) {
                        Err(m) => Message::error(codec::code::BAD_ACTION, m),
                        Ok(a) => match env.step(a) {
                            Ok(o) => {
                                in_episode = !o.done;
                                obs_message(o)
                            }
                            Err(EnvError::BadAction(m)) => Message::error(codec::code::BAD_ACTION, m),
                            Err(EnvError::NotReset) => {
                                in_episode = false;
                                Message::error(codec::code::NOT_RESET, "act before reset")
                            }
                            Err(e) => {
                                send(&mut output, &Message::error(codec::code::SIM_ERROR, e.to_string()))?;
                                return Ok(SessionEnd::Failed);
                            }
                        },
                    }
                }
            }
            other => Message::error(
                codec::code::UNEXPECTED,
                format!("a client does not send `{}`", other.type_name()),
            ),
        };
        send(&mut output, &reply)?;
    }
    Ok(SessionEnd::Disconnected)
}

/// Binds `endpoint`, reports the bound address through `on_bound`, and
/// serves the first client that connects.
pub fn serve_tcp(
    env: &mut dyn Environment,
    endpoint: &str,
    on_bound: impl FnOnce(std::net::SocketAddr),
) -> std::io::Result<SessionEnd> {
    let listener = TcpListener::bind(endpoint)?;
    on_bound(listener.local_addr()?);
    let (stream, _) = listener.accept()?;
    stream.set_nodelay(true)?;
    let reader = BufReader::new(stream.try_clone()?);
    serve(env, reader, std::io::BufWriter::new(stream))
}

pub fn serve_stdio(env: &mut dyn Environment) -> std::io::Result<SessionEnd> {
    let stdin = std::io::stdin();
    serve(env, stdin.lock(), std::io::stdout().lock())
}

enum Transport {
    Tcp(TcpStream),
    Child(Child),
}

/// Client side: an [`Environment`] backed by a protocol server.
///
/// Endpoints are `host:port` for TCP or `exec:<command>` to spawn a server
/// and talk to it over its stdin/stdout.
pub struct RemoteEnv {
    spec: EnvSpec,
    writer: Box<dyn Write + Send>,
    lines: Receiver<std::io::Result<String>>,
    timeout: Duration,
    transport: Transport,
    in_episode: bool,
}

impl RemoteEnv {
    pub fn connect(endpoint: &str, timeout: Duration) -> Result<Self, EnvError> {
        let (reader, writer, transport): (Box<dyn BufRead + Send>, Box<dyn Write + Send>, Transport) =
            if let Some(cmd) = endpoint.strip_prefix("exec:") {
                let mut parts = cmd.split_whitespace();
                let program = parts
                    .next()
                    .ok_or_else(|| EnvError::Protocol("empty exec endpoint".into()))?;
                let mut child = Command::new(program)
                    .args(parts)
                    .stdin(Stdio::piped())
                    .stdout(Stdio::piped())
                    .stderr(Stdio::inherit())
                    .spawn()?;
                let stdout = child.stdout.take().expect("piped stdout");
                let stdin = child.stdin.take().expect("piped stdin");
                (Box::new(BufReader::new(stdout)), Box::new(stdin), Transport::Child(child))
            } else {
                let addr = endpoint
                    .to_socket_addrs()?
                    .next()
                    .ok_or_else(|| EnvError::Protocol(format!("cannot resolve `{endpoint}`")))?;
                let stream = TcpStream::connect_timeout(&addr, timeout)?;
                stream.set_nodelay(true)?;
                (
                    Box::new(BufReader::new(stream.try_clone()?)),
                    Box::new(stream.try_clone()?),
                    Transport::Tcp(stream),
                )
            };
        let (tx, rx) = mpsc::channel();
        std::thread::spawn(move || {
            for line in reader.lines() {
                let stop = line.is_err();
                if tx.send(line).is_err() || stop {
                    break;
                }
            }
        });
        let mut env = Self {
            spec: EnvSpec {
                features: Vec::new(),
                action: ActionSpec::discrete(),
            },
            writer,
            lines: rx,
            timeout,
            transport,
            in_episode: false,
        };
        match env.receive()? {
            Message::Hello { features, action } => env.spec = EnvSpec { features, action },
            other => {
                return Err(EnvError::Protocol(format!(
                    "expected hello, got `{}`",
                    other.type_name()
                )))
            }
        }
        Ok(env)
    }

    fn receive(&mut self) -> Result<Message, EnvError> {
        let line = match self.lines.recv_timeout(self.timeout) {
            Ok(Ok(line)) => line,
            Ok(Err(e)) => return Err(EnvError::Io(e)),
            Err(RecvTimeoutError::Timeout) => return Err(EnvError::Timeout(self.timeout)),
            Err(RecvTimeoutError::Disconnected) => return Err(EnvError::Closed),
        };
        match decode(&line).map_err(|e| EnvError::Protocol(e.to_string()))? {
            Message::Error { code, message } => Err(match code.as_str() {
                codec::code::BAD_ACTION => EnvError::BadAction(message),
                codec::code::BAD_WINDOW => EnvError::Window(message),
                codec::code::NOT_RESET => EnvError::NotReset,
                _ => EnvError::Remote { code, message },
            }),
            m => Ok(m),
        }
    }

    fn request(&mut self, message: &Message) -> Result<EnvObservation, EnvError> {
        send(&mut self.writer, message).map_err(|e| match e.kind() {
            std::io::ErrorKind::BrokenPipe | std::io::ErrorKind::ConnectionReset => EnvError::Closed,
            _ => EnvError::Io(e),
        })?;
        match self.receive()? {
            Message::Obs {
                timestamp,
                features,
                cooling_w,
                baseline_w,
                done,
            } => {
                if features.len() != self.spec.features.len() {
                    return Err(EnvError::SpecMismatch(format!(
                        "obs carries {} features, hello declared {}",
                        features.len(),
                        self.spec.features.len()
                    )));
                }
                self.in_episode = !done;
                Ok(EnvObservation {
                    time: timestamp,
                    features,
                    cooling_w,
                    baseline_w,
                    done,
                })
            }
            other => Err(EnvError::Protocol(format!("expected obs, got `{}`", other.type_name()))),
        }
    }
}

impl Environment for RemoteEnv {
    fn spec(&self) -> EnvSpec {
        self.spec.clone()
    }

    fn reset(&mut self, window: &EpisodeWindow) -> Result<EnvObservation, EnvError> {
        self.request(&Message::Reset {
            seed: window.seed,
            start: window.start,
            end: window.end,
        })
    }

    fn step(&mut self, action: Action) -> Result<EnvObservation, EnvError> {
        if !self.in_episode {
            return Err(EnvError::NotReset);
        }
        self.request(&Message::Act {
            action: vec![action.value()],
        })
    }
}

impl Drop for RemoteEnv {
    fn drop(&mut self) {
        let _ = send(&mut self.writer, &Message::Close);
        match &mut self.transport {
            Transport::Tcp(stream) => {
                let _ = stream.shutdown(std::net::Shutdown::Both);
            }
            Transport::Child(child) => {
                // The server exits on close; give it a moment before forcing it.
                for _ in 0..50 {
                    if let Ok(Some(_)) = child.try_wait() {
                        return;
                    }
                    std::thread::sleep(Duration::from_millis(10));
                }
                let _ = child.kill();
                let _ = child.wait();
            }
        }
    }
}
