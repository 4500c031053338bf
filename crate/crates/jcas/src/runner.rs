use jcas_core::metrics::EpisodeRecord;
use jcas_core::pipeline::{Runner, SerialRunner, Trainer};
use jcas_core::Result;

/// Spreads trainers over up to `threads` scoped threads. Trainers own their
/// random streams, so results match [`SerialRunner`] exactly.
#[derive(Debug, Clone, Copy)]
pub struct ThreadRunner {
    threads: usize,
}

impl ThreadRunner {
    pub fn new(threads: usize) -> Self {
        ThreadRunner {
            threads: threads.max(1),
        }
    }
}

impl Runner for ThreadRunner {
    fn advance(
        &self,
        trainers: &mut [Trainer],
        steps: u64,
        progress: &(dyn Fn(usize, &EpisodeRecord) + Sync),
    ) -> Result<()> {
        if self.threads == 1 || trainers.len() <= 1 {
            return SerialRunner.advance(trainers, steps, progress);
        }
        let chunk = trainers.len().div_ceil(self.threads);
        std::thread::scope(|scope| {
            let handles: Vec<_> = trainers
                .chunks_mut(chunk)
                .enumerate()
                .map(|(c, group)| {
                    scope.spawn(move || {
                        for (j, t) in group.iter_mut().enumerate() {
                            let job = c * chunk + j;
                            t.run(steps, &mut |r| progress(job, r))?;
                        }
                        Ok(())
                    })
                })
                .collect();
            handles
                .into_iter()
                .try_for_each(|h| h.join().expect("trainer thread panicked"))
        })
    }
}
