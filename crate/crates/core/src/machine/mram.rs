/// Lazily populated byte image. Untouched pages read as zero, so a 64 MiB
/// bank costs memory only for the bytes a run actually writes.
#[derive(Debug, Clone)]
pub struct SparseMemory {
    len: usize,
    pages: Vec<Option<Box<[u8]>>>,
}

const PAGE_BITS: u32 = 16;
const PAGE: usize = 1 << PAGE_BITS;

impl SparseMemory {
    pub fn new(len: usize) -> Self {
        Self {
            len,
            pages: vec![None; len.div_ceil(PAGE)],
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Bytes of host memory currently backing the image.
    pub fn resident_bytes(&self) -> usize {
        self.pages.iter().flatten().count() * PAGE
    }

    pub fn read(&self, offset: usize, buf: &mut [u8]) {
        assert!(offset + buf.len() <= self.len, "sparse read out of range");
        let mut done = 0;
        while done < buf.len() {
            let pos = offset + done;
            let (page, within) = (pos >> PAGE_BITS, pos & (PAGE - 1));
            let n = (PAGE - within).min(buf.len() - done);
            match &self.pages[page] {
                Some(p) => buf[done..done + n].copy_from_slice(&p[within..within + n]),
                None => buf[done..done + n].fill(0),
            }
            done += n;
        }
    }

    pub fn write(&mut self, offset: usize, data: &[u8]) {
        assert!(offset + data.len() <= self.len, "sparse write out of range");
        let mut done = 0;
        while done < data.len() {
            let pos = offset + done;
            let (page, within) = (pos >> PAGE_BITS, pos & (PAGE - 1));
            let n = (PAGE - within).min(data.len() - done);
            let p = self.pages[page].get_or_insert_with(|| vec![0u8; PAGE].into_boxed_slice());
            p[within..within + n].copy_from_slice(&data[done..done + n]);
            done += n;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn crosses_pages_and_reads_zero() {
        let mut m = SparseMemory::new(3 * PAGE);
        let data: Vec<u8> = (0..200u8).collect();
        m.write(PAGE - 100, &data);
        let mut back = vec![0; 200];
        m.read(PAGE - 100, &mut back);
        assert_eq!(back, data);
        let mut zeros = vec![1; 16];
        m.read(2 * PAGE + 8, &mut zeros);
        assert_eq!(zeros, vec![0; 16]);
        assert_eq!(m.resident_bytes(), 2 * PAGE);
    }
}
