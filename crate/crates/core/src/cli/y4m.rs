//! Streaming YUV4MPEG2 reader and writer, 8-bit 4:2:0 only.

use std::io::{BufRead, Read, Write};

use crate::error::{Error, Result};

const MAGIC: &str = "YUV4MPEG2";
const FRAME: &[u8] = b"FRAME";
/// Chroma tags that all denote 8-bit 4:2:0 (siting differs, layout does not).
const C420_TAGS: &[&str] = &["420", "420jpeg", "420paldv", "420mpeg2"];
/// Longest header or frame-parameter line accepted.
const MAX_LINE: u64 = 4096;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Y4mHeader {
    pub width: usize,
    pub height: usize,
    pub fps_num: u32,
    pub fps_den: u32,
    /// `None` when the header carries no `C` token (4:2:0 by default).
    pub chroma: Option<String>,
    /// Remaining tokens (interlacing, aspect, comments), in header order.
    pub extra: Vec<String>,
    /// Number of `extra` tokens that precede the `C` token.
    chroma_pos: usize,
}

impl Y4mHeader {
    pub fn new(width: usize, height: usize, fps_num: u32, fps_den: u32) -> Result<Self> {
        let h = Y4mHeader {
            width,
            height,
            fps_num,
            fps_den,
            chroma: Some("420".into()),
            extra: Vec::new(),
            chroma_pos: 0,
        };
        h.check()?;
        Ok(h)
    }

    /// Parses a header line without its trailing newline.
    pub fn parse(line: &str) -> Result<Self> {
        let mut tokens = line.split(' ');
        if tokens.next() != Some(MAGIC) {
            return Err(Error::Y4mHeader(format!("expected {MAGIC} signature")));
        }
        let (mut width, mut height, mut fps, mut chroma, mut extra) = (None, None, None, None, Vec::new());
        let mut chroma_pos = 0;
        for tok in tokens {
            let mut chars = tok.chars();
            let tag = chars.next().ok_or_else(|| Error::Y4mHeader("empty token".into()))?;
            let value = chars.as_str();
            let dim = |v: &str| {
                v.parse::<usize>()
                    .ok()
                    .filter(|&d| d > 0)
                    .ok_or_else(|| Error::Y4mHeader(format!("bad dimension '{tok}'")))
            };
            match tag {
                'W' => width = Some(dim(value)?),
                'H' => height = Some(dim(value)?),
                'F' => {
                    let ratio = value
                        .split_once(':')
                        .and_then(|(n, d)| Some((n.parse::<u32>().ok()?, d.parse::<u32>().ok()?)))
                        .filter(|&(n, d)| n > 0 && d > 0)
                        .ok_or_else(|| Error::Y4mHeader(format!("bad frame rate '{tok}'")))?;
                    fps = Some(ratio);
                }
                'C' => {
                    chroma = Some(value.to_string());
                    chroma_pos = extra.len();
                }
                _ => extra.push(tok.to_string()),
            }
        }
        let (fps_num, fps_den) = fps.ok_or_else(|| Error::Y4mHeader("missing F token".into()))?;
        let h = Y4mHeader {
            width: width.ok_or_else(|| Error::Y4mHeader("missing W token".into()))?,
            height: height.ok_or_else(|| Error::Y4mHeader("missing H token".into()))?,
            fps_num,
            fps_den,
            chroma,
            extra,
            chroma_pos,
        };
        h.check()?;
        Ok(h)
    }

    fn check(&self) -> Result<()> {
        if let Some(c) = &self.chroma {
            if !C420_TAGS.contains(&c.as_str()) {
                return Err(Error::Y4mUnsupportedChroma(c.clone()));
            }
        }
        if !self.width.is_multiple_of(2) || !self.height.is_multiple_of(2) {
            return Err(Error::Y4mHeader(format!(
                "4:2:0 needs even dimensions, got {}x{}",
                self.width, self.height
            )));
        }
        Ok(())
    }

    /// Header line, without the newline.
    pub fn to_line(&self) -> String {
        let mut s = format!("{MAGIC} W{} H{} F{}:{}", self.width, self.height, self.fps_num, self.fps_den);
        let pos = self.chroma_pos.min(self.extra.len());
        for tok in &self.extra[..pos] {
            s.push(' ');
            s.push_str(tok);
        }
        if let Some(c) = &self.chroma {
            s.push_str(" C");
            s.push_str(c);
        }
        for tok in &self.extra[pos..] {
            s.push(' ');
            s.push_str(tok);
        }
        s
    }

    /// Same stream parameters at `r` times the resolution.
    pub fn scaled(&self, r: usize) -> Y4mHeader {
        Y4mHeader {
            width: self.width * r,
            height: self.height * r,
            ..self.clone()
        }
    }

    pub fn luma_len(&self) -> usize {
        self.width * self.height
    }

    pub fn chroma_len(&self) -> usize {
        (self.width / 2) * (self.height / 2)
    }

    pub fn frame_len(&self) -> usize {
        self.luma_len() + 2 * self.chroma_len()
    }
}

/// One planar frame: `Y` is `height x width`, `Cb` and `Cr` are half size.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Y4mFrame {
    pub y: Vec<u8>,
    pub cb: Vec<u8>,
    pub cr: Vec<u8>,
}

/// Reads the line up to `\n` (consumed, not returned).
fn read_line(r: &mut impl BufRead, buf: &mut Vec<u8>) -> Result<bool> {
    buf.clear();
    let n = r.by_ref().take(MAX_LINE).read_until(b'\n', buf)?;
    if n == 0 {
        return Ok(false);
    }
    if buf.last() != Some(&b'\n') {
        return Err(Error::Y4mBadFrameMarker);
    }
    buf.pop();
    Ok(true)
}

pub struct Y4mReader<R> {
    inner: R,
    header: Y4mHeader,
    line: Vec<u8>,
}

impl<R: BufRead> Y4mReader<R> {
    pub fn new(mut inner: R) -> Result<Self> {
        let mut line = Vec::new();
        inner.by_ref().take(MAX_LINE).read_until(b'\n', &mut line)?;
        if line.last() != Some(&b'\n') {
            return Err(Error::Y4mHeader("header line is unterminated".into()));
        }
        line.pop();
        let text = std::str::from_utf8(&line).map_err(|_| Error::Y4mHeader("header is not ASCII".into()))?;
        let header = Y4mHeader::parse(text)?;
        Ok(Y4mReader {
            inner,
            header,
            line: Vec::new(),
        })
    }

    pub fn header(&self) -> &Y4mHeader {
        &self.header
    }

    /// The next frame, or `None` at a clean end of stream.
    pub fn next_frame(&mut self) -> Result<Option<Y4mFrame>> {
        if !read_line(&mut self.inner, &mut self.line)? {
            return Ok(None);
        }
        let marker_ok = self.line.starts_with(FRAME) && matches!(self.line.get(FRAME.len()), None | Some(b' '));
        if !marker_ok {
            return Err(Error::Y4mBadFrameMarker);
        }
        let mut plane = |len: usize, done: usize| -> Result<Vec<u8>> {
            let mut buf = Vec::with_capacity(len);
            self.inner.by_ref().take(len as u64).read_to_end(&mut buf)?;
            if buf.len() < len {
                return Err(Error::Y4mTruncatedFrame {
                    expected: self.header.frame_len(),
                    found: done + buf.len(),
                });
            }
            Ok(buf)
        };
        let (yl, cl) = (self.header.luma_len(), self.header.chroma_len());
        let y = plane(yl, 0)?;
        let cb = plane(cl, yl)?;
        let cr = plane(cl, yl + cl)?;
        Ok(Some(Y4mFrame { y, cb, cr }))
    }
}

impl<R: BufRead> Iterator for Y4mReader<R> {
    type Item = Result<Y4mFrame>;

    fn next(&mut self) -> Option<Self::Item> {
        self.next_frame().transpose()
    }
}

pub struct Y4mWriter<W> {
    inner: W,
    header: Y4mHeader,
}

impl<W: Write> Y4mWriter<W> {
    /// Writes the stream header immediately.
    pub fn new(mut inner: W, header: Y4mHeader) -> Result<Self> {
        header.check()?;
        writeln!(inner, "{}", header.to_line())?;
        Ok(Y4mWriter { inner, header })
    }

    pub fn header(&self) -> &Y4mHeader {
        &self.header
    }

    pub fn write_frame(&mut self, frame: &Y4mFrame) -> Result<()> {
        let (yl, cl) = (self.header.luma_len(), self.header.chroma_len());
        if frame.y.len() != yl || frame.cb.len() != cl || frame.cr.len() != cl {
            return Err(Error::InvalidShape(format!(
                "frame planes {}/{}/{} do not match header sizes {yl}/{cl}/{cl}",
                frame.y.len(),
                frame.cb.len(),
                frame.cr.len()
            )));
        }
        self.inner.write_all(b"FRAME\n")?;
        self.inner.write_all(&frame.y)?;
        self.inner.write_all(&frame.cb)?;
        self.inner.write_all(&frame.cr)?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<W> {
        self.inner.flush()?;
        Ok(self.inner)
    }
}
