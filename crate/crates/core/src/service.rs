//! Forward-evaluation service: a binary request/response loop over any byte
//! stream, so a co-located trainer can ask for simulated channel data.
//!
//! All integers and floats are little-endian.
//!
//! ```text
//! request  = magic:u32 count:u32 raster[count]     raster = n_x*n_z f32, x slow
//! response = magic:u32 status:u32 [cd: n_p*n_t*n_c f32 in [p][t][c] order, status 0 only]
//! ```
//!
//! Frames are handled one at a time and independently. A protocol error
//! (bad magic or a truncated frame) is answered once and ends the session
//! because the stream can no longer be framed.

use std::io::{self, BufReader, BufWriter, Read, Write};

use ndarray::Array2;

use crate::channel::forward;
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::grid::Medium;
use crate::io::{read_f32s, write_f32s};
use crate::sources::TransmissionSetup;

pub const MAGIC: u32 = 0x4D42_5146;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u32)]
pub enum Status {
    Ok = 0,
    Protocol = 1,
    Shape = 2,
    Cfl = 3,
    Divergence = 4,
    InvalidValues = 5,
}

impl Status {
    pub fn from_code(code: u32) -> Option<Status> {
        Some(match code {
            0 => Status::Ok,
            1 => Status::Protocol,
            2 => Status::Shape,
            3 => Status::Cfl,
            4 => Status::Divergence,
            5 => Status::InvalidValues,
            _ => return None,
        })
    }

    fn of(err: &Error) -> Status {
        match err {
            Error::Cfl(_) => Status::Cfl,
            Error::Divergence { .. } => Status::Divergence,
            Error::Shape(_) => Status::Shape,
            _ => Status::InvalidValues,
        }
    }
}

/// Per-session totals.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SessionSummary {
    pub frames: usize,
    pub failures: usize,
}

/// A fixed run (grid, physics, PML, transmission setup) answering forward
/// requests for arbitrary property maps.
#[derive(Clone, Debug)]
pub struct ForwardService {
    template: Medium,
    setup: TransmissionSetup,
}

enum Frame {
    End,
    Broken,
    Request(Vec<Array2<f64>>),
    WrongCount,
}

fn read_u32(r: &mut impl Read) -> io::Result<Option<u32>> {
    let mut buf = [0u8; 4];
    let mut got = 0;
    while got < 4 {
        match r.read(&mut buf[got..])? {
            0 if got == 0 => return Ok(None),
            0 => return Err(io::ErrorKind::UnexpectedEof.into()),
            n => got += n,
        }
    }
    Ok(Some(u32::from_le_bytes(buf)))
}

fn truncated(e: &io::Error) -> bool {
    e.kind() == io::ErrorKind::UnexpectedEof
}

impl ForwardService {
    pub fn new(run: &RunConfig) -> Result<Self> {
        run.validate()?;
        let template = run.uniform_medium(match run.modality {
            crate::grid::Modality::Acoustic => [run.pml.c_ref, 1000.0],
            crate::grid::Modality::Em => [0.0, 1.0],
        })?;
        Ok(ForwardService {
            template,
            setup: run.setup()?,
        })
    }

    /// Number of `f32` values in one raster.
    pub fn raster_len(&self) -> usize {
        self.template.grid().len()
    }

    /// `(n_p, n_t, n_c)` of every successful response.
    pub fn cd_shape(&self) -> (usize, usize, usize) {
        (self.setup.n_p(), self.setup.n_t(), self.setup.n_c())
    }

    /// Channel data for one set of property rasters, as the service computes it.
    pub fn evaluate(&self, maps: [Array2<f64>; 2]) -> Result<Vec<f64>> {
        if maps.iter().any(|m| m.iter().any(|v| !v.is_finite())) {
            return Err(Error::invalid("property maps", "contain non-finite values"));
        }
        let medium = self.template.with_values(maps)?;
        Ok(forward(&medium, &self.setup)?.values.into_iter().collect())
    }

    fn read_frame(&self, r: &mut impl Read) -> io::Result<Frame> {
        let Some(magic) = read_u32(r)? else {
            return Ok(Frame::End);
        };
        if magic != MAGIC {
            return Ok(Frame::Broken);
        }
        let count = match read_u32(r) {
            Ok(Some(c)) => c as usize,
            Ok(None) => return Ok(Frame::Broken),
            Err(e) if truncated(&e) => return Ok(Frame::Broken),
            Err(e) => return Err(e),
        };
        let n = self.raster_len();
        if count != 2 {
            // skip the payload so the next frame stays aligned
            let want = (count as u64) * (n as u64) * 4;
            let skipped = io::copy(&mut r.by_ref().take(want), &mut io::sink())?;
            return Ok(if skipped == want { Frame::WrongCount } else { Frame::Broken });
        }
        let (n_x, n_z) = self.template.grid().shape();
        let mut maps = Vec::with_capacity(2);
        for _ in 0..2 {
            match read_f32s(r, n) {
                Ok(v) => maps.push(Array2::from_shape_vec((n_x, n_z), v).expect("raster length")),
                Err(e) if truncated(&e) => return Ok(Frame::Broken),
                Err(e) => return Err(e),
            }
        }
        Ok(Frame::Request(maps))
    }

    fn respond(w: &mut impl Write, status: Status, cd: &[f64]) -> io::Result<()> {
        w.write_all(&MAGIC.to_le_bytes())?;
        w.write_all(&(status as u32).to_le_bytes())?;
        if status == Status::Ok {
            write_f32s(w, cd.iter().copied())?;
        }
        w.flush()
    }

    /// Serves frames until end of input or a protocol error.
    pub fn serve(&self, input: impl Read, output: impl Write) -> io::Result<SessionSummary> {
        let mut r = BufReader::new(input);
        let mut w = BufWriter::new(output);
        let mut summary = SessionSummary::default();
        loop {
            let status = match self.read_frame(&mut r)? {
                Frame::End => return Ok(summary),
                Frame::Broken => {
                    summary.frames += 1;
                    summary.failures += 1;
                    Self::respond(&mut w, Status::Protocol, &[])?;
                    return Ok(summary);
                }
                Frame::WrongCount => {
                    Self::respond(&mut w, Status::Shape, &[])?;
                    Status::Shape
                }
                Frame::Request(maps) => {
                    let [a, b]: [Array2<f64>; 2] = maps.try_into().expect("two rasters");
                    match self.evaluate([a, b]) {
                        Ok(cd) => {
                            Self::respond(&mut w, Status::Ok, &cd)?;
                            Status::Ok
                        }
                        Err(e) => {
                            let s = Status::of(&e);
                            Self::respond(&mut w, s, &[])?;
                            s
                        }
                    }
                }
            };
            summary.frames += 1;
            if status != Status::Ok {
                summary.failures += 1;
            }
        }
    }

    pub fn serve_stdio(&self) -> io::Result<SessionSummary> {
        self.serve(io::stdin().lock(), io::stdout().lock())
    }

    /// Listens on a Unix socket; each connection gets its own session thread.
    /// Returns only on a listener error.
    #[cfg(unix)]
    pub fn serve_unix(&self, path: &std::path::Path) -> Result<()> {
        use std::os::unix::net::UnixListener;
        let listener = UnixListener::bind(path).map_err(|e| Error::io(path, e))?;
        std::thread::scope(|scope| -> Result<()> {
            for stream in listener.incoming() {
                let stream = stream.map_err(|e| Error::io(path, e))?;
                scope.spawn(move || {
                    let reader = match stream.try_clone() {
                        Ok(r) => r,
                        Err(_) => return,
                    };
                    let _ = self.serve(reader, stream);
                });
            }
            Ok(())
        })
    }
}

/// Client side: encodes one request frame.
pub fn encode_request(maps: &[Array2<f64>]) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(&MAGIC.to_le_bytes());
    out.extend_from_slice(&(maps.len() as u32).to_le_bytes());
    for m in maps {
        write_f32s(&mut out, m.as_standard_layout().iter().copied()).expect("vec write");
    }
    out
}

/// Client side: reads one response frame; `cd_len` is `n_p·n_t·n_c`.
pub fn read_response(r: &mut impl Read, cd_len: usize) -> io::Result<(Status, Option<Vec<f64>>)> {
    let magic = read_u32(r)?.ok_or(io::ErrorKind::UnexpectedEof)?;
    if magic != MAGIC {
        return Err(io::Error::new(io::ErrorKind::InvalidData, "bad response magic"));
    }
    let code = read_u32(r)?.ok_or(io::ErrorKind::UnexpectedEof)?;
    let status = Status::from_code(code)
        .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidData, format!("unknown status {code}")))?;
    let cd = if status == Status::Ok {
        Some(read_f32s(r, cd_len)?)
    } else {
        None
    };
    Ok((status, cd))
}
