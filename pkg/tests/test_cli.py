import pytest

from cohortq.cli import main

from .conftest import table1_csv_text


@pytest.fixture
def table1_csv(tmp_path):
    path = tmp_path / "table1.csv"
    path.write_text(table1_csv_text())
    return path


@pytest.fixture
def table1_db(tmp_path, table1_csv):
    db = tmp_path / "db"
    assert main(["ingest", "--input", str(table1_csv), "--output", str(db)]) == 0
    return db


def _run(capsys, argv):
    capsys.readouterr()  # drop output accumulated during fixture setup
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


class TestIngest:
    def test_single_chunk_by_default(self, capsys, tmp_path, table1_csv):
        code, out, _ = _run(capsys, [
            "ingest", "--input", str(table1_csv), "--output", str(tmp_path / "db")])
        assert code == 0
        assert "tuples: 10" in out
        assert "chunks: 1" in out
        assert "compressed bytes:" in out

    def test_chunk_size_eight_makes_two_chunks(self, capsys, tmp_path, table1_csv):
        code, out, _ = _run(capsys, [
            "ingest", "--input", str(table1_csv), "--output", str(tmp_path / "db"),
            "--chunk-size", "8"])
        assert code == 0
        assert "chunks: 2" in out

    def test_missing_input_exits_one(self, capsys, tmp_path):
        code, _, err = _run(capsys, [
            "ingest", "--input", str(tmp_path / "nope.csv"),
            "--output", str(tmp_path / "db")])
        assert code == 1
        assert "error" in err

    def test_duplicate_row_exits_one_with_row_number(self, capsys, tmp_path):
        lines = table1_csv_text().splitlines()
        bad = tmp_path / "bad.csv"
        bad.write_text("\n".join([lines[0], lines[1], lines[1]]) + "\n")
        code, _, err = _run(capsys, [
            "ingest", "--input", str(bad), "--output", str(tmp_path / "db")])
        assert code == 1
        assert "row 2" in err

    def test_explicit_schema_with_integer_dimension(self, capsys, tmp_path):
        import json

        schema_file = tmp_path / "schema.json"
        schema_file.write_text(json.dumps({
            "user": "player", "time": "time", "action": "action",
            "dimensions": [{"name": "level", "kind": "integer"}],
            "measures": ["gold"], "table": "GameActions",
        }))
        csv_path = tmp_path / "lv.csv"
        csv_path.write_text(
            "player,time,action,level,gold\n"
            "p1,100,launch,3,0\n"
            "p1,200,shop,3,9\n"
            "p2,150,launch,8,0\n"
            "p2,260,shop,8,4\n"
        )
        db = tmp_path / "db"
        assert main(["ingest", "--input", str(csv_path), "--output", str(db),
                     "--schema", str(schema_file)]) == 0
        code, out, _ = _run(capsys, [
            "query", "--db", str(db),
            "--query", 'SELECT level, COHORTSIZE, AGE, Sum(gold) FROM GameActions '
                       'BIRTH FROM action = "launch" AND level > 5 COHORT BY level'])
        assert code == 0
        assert out.strip().splitlines()[1:] == ["8,1,1,4"]


class TestGen:
    def test_deterministic(self, capsys, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        _run(capsys, ["gen", "--users", "30", "--seed", "7", "--output", str(a)])
        _run(capsys, ["gen", "--users", "30", "--seed", "7", "--output", str(b)])
        assert a.read_bytes() == b.read_bytes()

    def test_scale_doubles_users(self, capsys, tmp_path):
        one, two = tmp_path / "one.csv", tmp_path / "two.csv"
        _run(capsys, ["gen", "--users", "10", "--output", str(one)])
        _run(capsys, ["gen", "--users", "10", "--scale", "2", "--output", str(two)])

        def users(path):
            rows = path.read_text().splitlines()[1:]
            return {line.split(",")[0] for line in rows}

        assert len(users(two)) == 2 * len(users(one))
        assert len(two.read_text().splitlines()) - 1 == 2 * (len(one.read_text().splitlines()) - 1)


QUERY = ('SELECT country, COHORTSIZE, AGE, Sum(gold) FROM GameActions '
         'BIRTH FROM action = "launch" COHORT BY country')


class TestQuery:
    def test_csv_output(self, capsys, table1_db):
        code, out, _ = _run(capsys, [
            "query", "--db", str(table1_db), "--query", QUERY])
        assert code == 0
        lines = out.strip().splitlines()
        assert lines[0] == "country,cohortsize,age,sum(gold)"
        assert lines[1] == "Australia,1,1,50"
        assert len(lines) == 7

    def test_engines_agree_byte_for_byte(self, capsys, table1_db):
        _, columnar, _ = _run(capsys, [
            "query", "--db", str(table1_db), "--query", QUERY, "--engine", "columnar"])
        _, oracle, _ = _run(capsys, [
            "query", "--db", str(table1_db), "--query", QUERY, "--engine", "oracle"])
        assert columnar == oracle

    def test_engines_agree_on_generated_data(self, capsys, tmp_path):
        from cohortq.bench import query_text

        csv_path, db = tmp_path / "g.csv", tmp_path / "gdb"
        assert main(["gen", "--users", "200", "--seed", "5",
                     "--output", str(csv_path)]) == 0
        assert main(["ingest", "--input", str(csv_path), "--output", str(db),
                     "--chunk-size", "1024"]) == 0
        for name in ("q1", "q3"):
            _, columnar, _ = _run(capsys, [
                "query", "--db", str(db), "--query", query_text(name)])
            _, oracle, _ = _run(capsys, [
                "query", "--db", str(db), "--query", query_text(name),
                "--engine", "oracle"])
            assert columnar == oracle and len(columnar.splitlines()) > 2

    def test_table_format(self, capsys, table1_db):
        code, out, _ = _run(capsys, [
            "query", "--db", str(table1_db), "--query", QUERY, "--format", "table"])
        assert code == 0
        assert out.splitlines()[0].split() == ["country", "cohortsize", "age", "sum(gold)"]

    def test_explain_prints_birth_below_age(self, capsys, table1_db):
        text = ('SELECT country, COHORTSIZE FROM GameActions '
                'AGE ACTIVITIES IN action = "shop" '
                'BIRTH FROM action = "launch" AND role = "dwarf" COHORT BY country')
        code, out, _ = _run(capsys, [
            "query", "--db", str(table1_db), "--query", text, "--explain"])
        assert code == 0
        lines = out.splitlines()
        assert lines[0].startswith("CohortAgg")
        assert "AgeSelect" in lines[1] and "BirthSelect" in lines[2]

    def test_malformed_query_exits_two(self, capsys, table1_db):
        code, _, err = _run(capsys, [
            "query", "--db", str(table1_db), "--query", "SELECT FROM"])
        assert code == 2
        assert "error" in err

    def test_validation_error_exits_two(self, capsys, table1_db):
        code, _, err = _run(capsys, [
            "query", "--db", str(table1_db),
            "--query", 'SELECT COHORTSIZE FROM GameActions '
                       'BIRTH FROM action = "launch" COHORT BY player'])
        assert code == 2

    def test_query_file_and_stdin(self, capsys, table1_db, tmp_path, monkeypatch):
        qfile = tmp_path / "q.sql"
        qfile.write_text(QUERY)
        code, out, _ = _run(capsys, [
            "query", "--db", str(table1_db), "--query-file", str(qfile)])
        assert code == 0 and "Australia" in out

    def test_age_unit_week(self, capsys, table1_db):
        code, out, _ = _run(capsys, [
            "query", "--db", str(table1_db), "--query", QUERY, "--age-unit", "week"])
        assert code == 0
        # every row of Table 1 lands within a week of its user's birth
        ages = {line.split(",")[2] for line in out.strip().splitlines()[1:]}
        assert ages == {"1"}

    def test_threads_env_fallback(self, capsys, table1_db, monkeypatch):
        monkeypatch.setenv("COHORTQ_THREADS", "2")
        code, out, _ = _run(capsys, [
            "query", "--db", str(table1_db), "--query", QUERY])
        assert code == 0 and "Australia,1,1,50" in out
        monkeypatch.setenv("COHORTQ_THREADS", "lots")
        code, _, err = _run(capsys, [
            "query", "--db", str(table1_db), "--query", QUERY])
        assert code == 1 and "COHORTQ_THREADS" in err

    def test_csv_fields_are_quoted_when_needed(self, capsys, tmp_path):
        csv_path = tmp_path / "odd.csv"
        csv_path.write_text(
            'player,time,action,place,gold\n'
            'p1,100,launch,"Town, The",0\n'
            'p1,200,shop,"Town, The",5\n'
        )
        db = tmp_path / "db"
        assert main(["ingest", "--input", str(csv_path), "--output", str(db)]) == 0
        code, out, _ = _run(capsys, [
            "query", "--db", str(db),
            "--query", 'SELECT place, COHORTSIZE, AGE, Sum(gold) FROM GameActions '
                       'BIRTH FROM action = "launch" COHORT BY place'])
        assert code == 0
        assert '"Town, The",1,1,5' in out


class TestBench:
    def test_single_query_timing_shape(self, capsys, table1_db):
        code, out, _ = _run(capsys, [
            "bench", "--db", str(table1_db), "--queries", "q1", "--repeat", "5"])
        assert code == 0
        lines = out.strip().splitlines()
        assert lines[0] == "query,rows,mean_seconds,run_1,run_2,run_3,run_4,run_5"
        cells = lines[1].split(",")
        assert cells[0] == "q1" and len(cells) == 8

    def test_repeat_one_mean_equals_single_run(self, capsys, table1_db):
        code, out, _ = _run(capsys, [
            "bench", "--db", str(table1_db), "--queries", "q3", "--repeat", "1"])
        assert code == 0
        cells = out.strip().splitlines()[1].split(",")
        assert cells[2] == cells[3]

    def test_unknown_query_exits_two(self, capsys, table1_db):
        code, _, err = _run(capsys, [
            "bench", "--db", str(table1_db), "--queries", "q99"])
        assert code == 2
        assert "unknown benchmark query" in err

    def test_all_queries_run_on_table1(self, capsys, table1_db):
        code, out, _ = _run(capsys, [
            "bench", "--db", str(table1_db), "--queries", "all", "--repeat", "1"])
        assert code == 0
        assert len(out.strip().splitlines()) == 9
