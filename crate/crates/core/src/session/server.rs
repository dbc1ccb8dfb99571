//! TCP front end for a [`Session`].
//!
//! One client is served at a time. A reader thread decodes client messages
//! and an optional tick thread requests playback steps; both feed a channel
//! drained by the calling thread, which alone owns the session. Every
//! command and step is therefore applied in one total order.

use std::io::{self, BufWriter, Write};
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc;
use std::sync::Arc;
use std::thread;
use std::time::Duration;

use super::protocol::{self, ClientMessage, Message, ReadError, ServerMessage, PROTOCOL_VERSION};
use super::{Event, FrameData, Mode, Session};

#[derive(Debug, Clone, Default)]
pub struct ServeOptions {
    /// Step automatically at this interval while playing.
    pub tick: Option<Duration>,
    /// Send each new base frame to the client before its overlay.
    pub send_frames: bool,
}

enum Input {
    Client(Message<ClientMessage>),
    Malformed(String),
    Closed,
    Tick,
}

pub struct Server {
    listener: TcpListener,
}

impl Server {
    pub fn bind(addr: impl ToSocketAddrs) -> io::Result<Self> {
        Ok(Self {
            listener: TcpListener::bind(addr)?,
        })
    }

    pub fn local_addr(&self) -> io::Result<SocketAddr> {
        self.listener.local_addr()
    }

    /// Serves the first client to connect until it disconnects, turning
    /// away anyone else meanwhile, and hands the session back.
    pub fn serve_one(self, session: Session, options: &ServeOptions) -> io::Result<Session> {
        let (stream, peer) = self.listener.accept()?;
        log::info!("client connected from {peer}");
        let stop = Arc::new(AtomicBool::new(false));
        let rejecter = spawn_rejecter(self.listener, Arc::clone(&stop))?;
        let result = run_connection(stream, session, options, &stop);
        stop.store(true, Ordering::SeqCst);
        let _ = rejecter.join();
        result
    }
}

fn spawn_rejecter(
    listener: TcpListener,
    stop: Arc<AtomicBool>,
) -> io::Result<thread::JoinHandle<()>> {
    listener.set_nonblocking(true)?;
    Ok(thread::spawn(move || {
        while !stop.load(Ordering::SeqCst) {
            match listener.accept() {
                Ok((mut extra, peer)) => {
                    log::warn!("rejecting second client {peer}");
                    let _ = extra.set_nonblocking(false);
                    let busy = Event::Error {
                        code: "busy".into(),
                        id: None,
                        detail: "session already has a client".into(),
                    };
                    let _ = protocol::write_json(&mut extra, &ServerMessage::Event { event: busy });
                    let _ = extra.shutdown(Shutdown::Both);
                }
                Err(e) if e.kind() == io::ErrorKind::WouldBlock => {
                    thread::sleep(Duration::from_millis(20))
                }
                Err(e) => {
                    log::error!("accept failed: {e}");
                    thread::sleep(Duration::from_millis(20));
                }
            }
        }
    }))
}

fn spawn_reader(stream: TcpStream, tx: mpsc::Sender<Input>) -> thread::JoinHandle<()> {
    thread::spawn(move || {
        let mut reader = io::BufReader::new(stream);
        loop {
            let input = match protocol::read_message::<_, ClientMessage>(&mut reader) {
                Ok(Some(m)) => Input::Client(m),
                Ok(None) => Input::Closed,
                Err(ReadError::Malformed(m)) => Input::Malformed(m),
                Err(ReadError::Io(e)) => {
                    log::info!("client stream ended: {e}");
                    Input::Closed
                }
            };
            let closed = matches!(input, Input::Closed);
            if tx.send(input).is_err() || closed {
                return;
            }
        }
    })
}

fn spawn_ticker(
    every: Duration,
    tx: mpsc::Sender<Input>,
    stop: Arc<AtomicBool>,
) -> thread::JoinHandle<()> {
    thread::spawn(move || {
        while !stop.load(Ordering::SeqCst) {
            thread::sleep(every);
            if tx.send(Input::Tick).is_err() {
                return;
            }
        }
    })
}

struct Connection<W: Write> {
    out: W,
    session: Session,
    send_frames: bool,
}

impl<W: Write> Connection<W> {
    fn send(&mut self, msg: &ServerMessage) -> io::Result<()> {
        protocol::write_json(&mut self.out, msg)
    }

    fn send_events(&mut self, events: Vec<Event>) -> io::Result<()> {
        for event in events {
            self.send(&ServerMessage::Event { event })?;
        }
        Ok(())
    }

    fn send_overlay(&mut self) -> io::Result<()> {
        let frame = self.session.overlay().frame_index;
        let svg = self.session.overlay_svg();
        self.send(&ServerMessage::Overlay { frame, svg })
    }

    fn step(&mut self, explicit: bool) -> io::Result<()> {
        if self.session.mode() == Mode::Paused && !explicit {
            return Ok(());
        }
        let before = self.session.next_frame();
        let (_, events) = self.session.step();
        let advanced = self.session.next_frame() != before;
        if advanced && self.send_frames {
            if let Some((index, frame)) = self.session.current_frame() {
                protocol::write_frame(&mut self.out, index, &frame.image)?;
            }
        }
        if advanced || explicit {
            self.send_overlay()?;
        }
        self.send_events(events)
    }
}

fn run_connection(
    stream: TcpStream,
    session: Session,
    options: &ServeOptions,
    stop: &Arc<AtomicBool>,
) -> io::Result<Session> {
    stream.set_nodelay(true)?;
    let (tx, rx) = mpsc::channel();
    let reader = spawn_reader(stream.try_clone()?, tx.clone());
    let ticker = options
        .tick
        .map(|every| spawn_ticker(every, tx.clone(), Arc::clone(stop)));
    drop(tx);

    let mut conn = Connection {
        out: BufWriter::new(stream.try_clone()?),
        session,
        send_frames: options.send_frames,
    };
    let hello = ServerMessage::Hello {
        protocol: PROTOCOL_VERSION,
        frame_size: conn.session.scene().frame_size,
        mode: conn.session.mode(),
        source: conn.session.source_mode(),
    };
    let outcome = (|| -> io::Result<()> {
        conn.send(&hello)?;
        if let Some((index, frame)) = conn.session.current_frame() {
            if conn.send_frames {
                protocol::write_frame(&mut conn.out, index, &frame.image)?;
            }
        }
        conn.send_overlay()?;
        let mut greeted = false;
        for input in rx.iter() {
            match input {
                Input::Closed => break,
                Input::Malformed(m) => {
                    log::warn!("ignoring malformed message: {m}");
                    conn.send_events(vec![Event::Error {
                        code: "malformed".into(),
                        id: None,
                        detail: m,
                    }])?;
                }
                Input::Client(Message::Json(ClientMessage::Hello { protocol })) => {
                    if protocol != PROTOCOL_VERSION {
                        let detail = format!(
                            "server speaks protocol {PROTOCOL_VERSION}, client sent {protocol}"
                        );
                        conn.send_events(vec![Event::Error {
                            code: "protocol-version".into(),
                            id: None,
                            detail,
                        }])?;
                        break;
                    }
                    greeted = true;
                }
                Input::Client(_) if !greeted => {
                    let detail = "send hello first".to_string();
                    conn.send_events(vec![Event::Error {
                        code: "handshake".into(),
                        id: None,
                        detail,
                    }])?;
                    break;
                }
                Input::Client(Message::Json(ClientMessage::Command { command })) => {
                    let events = conn.session.apply(command);
                    let failed = events.iter().any(Event::is_error);
                    conn.send_events(events)?;
                    if !failed {
                        conn.send_overlay()?;
                    }
                }
                Input::Client(Message::Json(ClientMessage::Step)) => conn.step(true)?,
                Input::Tick => conn.step(false)?,
                Input::Client(Message::Frame { image, .. }) => {
                    if !conn.session.push_frame(FrameData::image(image)) {
                        let detail = "frames can only be pushed to a live session".to_string();
                        conn.send_events(vec![Event::Error {
                            code: "not-live".into(),
                            id: None,
                            detail,
                        }])?;
                    }
                }
            }
        }
        Ok(())
    })();

    stop.store(true, Ordering::SeqCst);
    let _ = conn.out.flush();
    let _ = stream.shutdown(Shutdown::Both);
    let _ = reader.join();
    if let Some(t) = ticker {
        let _ = t.join();
    }
    match outcome {
        Ok(()) => Ok(conn.session),
        Err(e)
            if matches!(
                e.kind(),
                io::ErrorKind::BrokenPipe | io::ErrorKind::ConnectionReset
            ) =>
        {
            log::info!("client went away: {e}");
            Ok(conn.session)
        }
        Err(e) => Err(e),
    }
}
