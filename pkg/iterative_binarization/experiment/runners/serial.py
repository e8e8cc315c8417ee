from iterative_binarization.experiment.runners.base import BaseRunner


class SerialRunner(BaseRunner):
    """Run jobs one after another in this process."""

    def run(self, jobs, data):
        results = []
        for index, job in enumerate(jobs, start=1):
            self.log.info(f"Job {index}/{len(jobs)}")
            results.append(job.execute(data, cfg=self.cfg, logger=self.log))
        return results
