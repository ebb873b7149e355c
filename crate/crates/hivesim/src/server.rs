//! Live control service. Connection threads decode frames into one ordered
//! channel; the simulation loop applies them at tick boundaries and fans
//! replies and snapshots back out.

use std::collections::BTreeMap;
use std::io::ErrorKind;
use std::net::{TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::mpsc::{self, Receiver, Sender, TryRecvError};
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use anyhow::Context;
use tungstenite::{Message, WebSocket};

use crate::control::{parse_request, Reply};
use crate::metrics::MetricsRow;
use crate::world::{ClientTag, Inbound, Outbound, World, SCRIPT};

const POLL: Duration = Duration::from_millis(2);
const HANDSHAKE: Duration = Duration::from_secs(5);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ServeOptions {
    /// Simulated seconds per wall-clock second; 0 runs unpaced.
    pub realtime: f64,
    /// The loop ends once the world reaches this tick.
    pub end_tick: u64,
}

enum Event {
    Joined(ClientTag),
    Item(ClientTag, Inbound),
}

type Clients = Arc<Mutex<BTreeMap<ClientTag, Sender<Message>>>>;

fn is_timeout(e: &tungstenite::Error) -> bool {
    matches!(e, tungstenite::Error::Io(io) if matches!(io.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut))
}

fn connection(stream: TcpStream, tag: ClientTag, events: Sender<Event>, outgoing: Receiver<Message>) {
    let _ = stream.set_nonblocking(false);
    let _ = stream.set_read_timeout(Some(HANDSHAKE));
    let Ok(mut ws): Result<WebSocket<TcpStream>, _> = tungstenite::accept(stream) else {
        return;
    };
    if ws.get_ref().set_read_timeout(Some(POLL)).is_err() || events.send(Event::Joined(tag)).is_err() {
        return;
    }
    loop {
        match ws.read() {
            Ok(Message::Text(text)) => {
                let item = match parse_request(text.as_str()) {
                    Ok(r) => Inbound::Command(r),
                    Err(f) => {
                        if ws.send(Message::text(f.reply().to_json())).is_err() {
                            break;
                        }
                        continue;
                    }
                };
                if events.send(Event::Item(tag, item)).is_err() {
                    break;
                }
            }
            Ok(Message::Binary(bytes)) => {
                if events.send(Event::Item(tag, Inbound::Raw(bytes.to_vec()))).is_err() {
                    break;
                }
            }
            Ok(Message::Close(_)) => break,
            Ok(_) => {}
            Err(e) if is_timeout(&e) => {}
            Err(_) => break,
        }
        loop {
            match outgoing.try_recv() {
                Ok(msg) => {
                    if ws.send(msg).is_err() {
                        return;
                    }
                }
                Err(TryRecvError::Empty) => break,
                Err(TryRecvError::Disconnected) => {
                    let _ = ws.close(None);
                    let _ = ws.flush();
                    return;
                }
            }
        }
    }
}

fn acceptor(
    listener: TcpListener,
    events: Sender<Event>,
    clients: Clients,
    stop: Arc<AtomicBool>,
) -> Vec<JoinHandle<()>> {
    let next = AtomicU64::new(SCRIPT + 1);
    let mut handles = Vec::new();
    while !stop.load(Ordering::Relaxed) {
        match listener.accept() {
            Ok((stream, _)) => {
                let tag = next.fetch_add(1, Ordering::Relaxed);
                let (tx, rx) = mpsc::channel();
                clients.lock().expect("client registry").insert(tag, tx);
                let events = events.clone();
                handles.push(thread::spawn(move || connection(stream, tag, events, rx)));
            }
            Err(e) if e.kind() == ErrorKind::WouldBlock => thread::sleep(POLL),
            Err(_) => thread::sleep(POLL),
        }
    }
    handles
}

struct Fanout {
    clients: Clients,
}

impl Fanout {
    fn send(&self, to: ClientTag, reply: &Reply) {
        let mut clients = self.clients.lock().expect("client registry");
        if let Some(tx) = clients.get(&to) {
            if tx.send(Message::text(reply.to_json())).is_err() {
                clients.remove(&to);
            }
        }
    }

    fn broadcast(&self, reply: &Reply) {
        let text = reply.to_json();
        self.clients
            .lock()
            .expect("client registry")
            .retain(|_, tx| tx.send(Message::text(text.clone())).is_ok());
    }
}

fn route(fanout: &Fanout, o: &Outbound) {
    if o.to != SCRIPT {
        fanout.send(o.to, &o.reply);
    }
}

fn snapshot_period(world: &World) -> u64 {
    ((1.0 / (world.snapshot_hz() * world.tick_s())).round() as u64).max(1)
}

/// Serves `world` on `listener` until it reaches `opts.end_tick`, handing
/// every closed metrics window to `on_row`. Returns the final world.
pub fn serve(
    listener: TcpListener,
    mut world: World,
    opts: ServeOptions,
    mut on_row: impl FnMut(&MetricsRow) -> anyhow::Result<()>,
) -> anyhow::Result<World> {
    listener.set_nonblocking(true).context("configuring listener")?;
    let clients: Clients = Arc::default();
    let stop = Arc::new(AtomicBool::new(false));
    let (events_tx, events) = mpsc::channel();
    let accept = {
        let (clients, stop) = (clients.clone(), stop.clone());
        thread::spawn(move || acceptor(listener, events_tx, clients, stop))
    };
    let fanout = Fanout { clients };
    let mut pace_origin = (Instant::now(), world.tick());
    let result = (|| -> anyhow::Result<()> {
        while world.tick() < opts.end_tick {
            for ev in events.try_iter() {
                match ev {
                    Event::Joined(tag) => fanout.send(tag, &Reply::Snapshot(world.snapshot())),
                    Event::Item(tag, Inbound::Command(r)) => world.submit(tag, r),
                    Event::Item(tag, Inbound::Raw(frame)) => world.submit_raw(tag, frame),
                }
            }
            let was_paused = world.is_paused();
            let mut toggled = false;
            for o in world.apply_pending() {
                if let Reply::Ack { command, .. } = &o.reply {
                    toggled |= command == "pause" || command == "resume";
                }
                route(&fanout, &o);
            }
            // straddling snapshots share the tick the toggle applied at
            if toggled {
                fanout.broadcast(&Reply::Snapshot(world.snapshot()));
            }
            let before = world.tick();
            for o in world.advance() {
                route(&fanout, &o);
            }
            if world.tick() > before {
                if world.at_window_boundary() {
                    on_row(&world.take_metrics_row())?;
                }
                if world.tick().is_multiple_of(snapshot_period(&world)) {
                    fanout.broadcast(&Reply::Snapshot(world.snapshot()));
                }
            }
            if was_paused != world.is_paused() {
                pace_origin = (Instant::now(), world.tick());
            }
            if world.is_paused() {
                thread::sleep(POLL);
            } else if opts.realtime > 0.0 {
                let sim = (world.tick() - pace_origin.1) as f64 * world.tick_s() / opts.realtime;
                let due = pace_origin.0 + Duration::from_secs_f64(sim);
                let now = Instant::now();
                if due > now {
                    thread::sleep(due - now);
                }
            }
        }
        fanout.broadcast(&Reply::Snapshot(world.snapshot()));
        Ok(())
    })();
    stop.store(true, Ordering::Relaxed);
    fanout.clients.lock().expect("client registry").clear();
    if let Ok(handles) = accept.join() {
        for h in handles {
            let _ = h.join();
        }
    }
    result.map(|()| world)
}
