import pytest

from usagemetrics.ingest import DOWNLOADS_HEADER, Access, Corpus, PaperRecord, month_from_index


def write_rows(path, header, rows):
    lines = [",".join(header)] + [",".join(str(x) for x in row) for row in rows]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def downloads_rows(pid, access, pub, counts):
    """Rows for one paper published at `pub` = (year, month) with the given monthly counts."""
    start = pub[0] * 12 + pub[1] - 1
    rows = []
    for age, n in enumerate(counts):
        y, m = month_from_index(start + age)
        rows.append((pid, access, pub[0], pub[1], y, m, n))
    return rows


def make_corpus(series, access=Access.NON_OA, pub=(2010, 1), end=None, citations=None):
    """Corpus from {paper_id: monthly counts}, all published at `pub`.

    Shorter series are published later so that every paper ends at the
    same observation month.
    """
    longest = max(len(s) for s in series.values())
    start = pub[0] * 12 + pub[1] - 1
    papers = []
    for pid, counts in series.items():
        y, m = month_from_index(start + longest - len(counts))
        papers.append(PaperRecord(pid, access, y, m, tuple(counts)))
    end = end or month_from_index(start + longest - 1)
    return Corpus(tuple(papers), end, citations)


@pytest.fixture
def write_downloads(tmp_path):
    def _write(rows, name="downloads.csv"):
        return write_rows(tmp_path / name, DOWNLOADS_HEADER, rows)

    return _write
