"""
結果の出力

- CSV / JSON（スキーマバージョン付き）
- HTML レポート（jinja2）
- PDF レポート（reportlab）
- 実行履歴（history/ 以下にタイムスタンプ付き JSON）
"""
import datetime
import io
import json
import os
import sys
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Union

import pandas as pd
from jinja2 import Environment, select_autoescape
from loguru import logger
from packaging import version
from reportlab.lib.pagesizes import A4
from reportlab.pdfgen import canvas

from . import __version__
from .errors import InputError, MissingFileError, SchemaVersionError

REPORT_SCHEMA_VERSION = "1.0"
SCHEMA_HEADER = "# schema-version: "

PathLike = Union[str, os.PathLike]


def _as_frame(rows: Union[pd.DataFrame, dict, Iterable[dict]]) -> pd.DataFrame:
    if isinstance(rows, pd.DataFrame):
        return rows
    if isinstance(rows, dict):
        rows = [rows]
    return pd.DataFrame(list(rows))


def _open_target(out: Optional[PathLike]):
    if out is None:
        return None
    Path(out).parent.mkdir(parents=True, exist_ok=True)
    return open(out, "w", encoding="utf-8", newline="")


def render_csv(rows) -> str:
    """先頭行にスキーマバージョンを付けた CSV 文字列"""
    buffer = io.StringIO()
    buffer.write(f"{SCHEMA_HEADER}{REPORT_SCHEMA_VERSION}\n")
    _as_frame(rows).to_csv(buffer, index=False, lineterminator="\n")
    return buffer.getvalue()


def render_json(payload: Any, kind: str) -> str:
    document = {"schema_version": REPORT_SCHEMA_VERSION, "tool_version": __version__, "kind": kind}
    if isinstance(payload, pd.DataFrame):
        payload = payload.to_dict(orient="records")
    document["data"] = payload
    return json.dumps(document, ensure_ascii=False, indent=2, default=_json_default)


def _json_default(value):
    if hasattr(value, "tolist"):
        return value.tolist()
    if isinstance(value, tuple):
        return list(value)
    raise TypeError(f"JSON に変換できない値です: {type(value).__name__}")


def write_text(text: str, out: Optional[PathLike] = None, stream=None) -> Optional[str]:
    """out が無ければ stream（既定は標準出力）へ書く"""
    target = _open_target(out)
    if target is None:
        (stream or sys.stdout).write(text)
        return None
    with target:
        target.write(text)
    logger.info(f"出力しました: {out}")
    return str(out)


def write_results_csv(rows, out: Optional[PathLike] = None, stream=None) -> Optional[str]:
    return write_text(render_csv(rows), out, stream)


def write_results_json(payload, kind: str, out: Optional[PathLike] = None, stream=None) -> Optional[str]:
    return write_text(render_json(payload, kind) + "\n", out, stream)


def read_results_csv(path: PathLike) -> pd.DataFrame:
    """スキーマバージョンを確認して CSV を読む"""
    if not os.path.exists(path):
        raise MissingFileError(path)
    with open(path, encoding="utf-8") as f:
        header = f.readline().strip()
        if not header.startswith(SCHEMA_HEADER):
            raise SchemaVersionError(f"スキーマバージョンの行がありません: {path}")
        _check_version(header[len(SCHEMA_HEADER):])
        return pd.read_csv(f)


def read_results_json(path: PathLike) -> dict:
    if not os.path.exists(path):
        raise MissingFileError(path)
    try:
        with open(path, encoding="utf-8") as f:
            document = json.load(f)
    except json.JSONDecodeError as e:
        raise InputError(f"JSON を解析できません: {path}: {e}") from e
    if "schema_version" not in document:
        raise SchemaVersionError(f"schema_version がありません: {path}")
    _check_version(str(document["schema_version"]))
    return document


def _check_version(found: str) -> None:
    if version.parse(found).major != version.parse(REPORT_SCHEMA_VERSION).major:
        raise SchemaVersionError(f"非対応のスキーマバージョン {found}（対応: {REPORT_SCHEMA_VERSION}）")


_HTML_TEMPLATE = """<!DOCTYPE html>
<html lang="ja">
<head>
<meta charset="UTF-8">
<title>{{ title }}</title>
<style>
body { font-family: 'メイリオ', 'Meiryo', sans-serif; line-height: 1.6; margin: 0; padding: 20px; background-color: #f5f5f5; }
.container { max-width: 1200px; margin: 0 auto; background-color: white; padding: 20px; border-radius: 5px; box-shadow: 0 0 10px rgba(0,0,0,0.1); }
h1, h2 { color: #333; border-bottom: 2px solid #eee; padding-bottom: 10px; }
.summary { margin: 20px 0; padding: 15px; background-color: #e9ecef; border-radius: 5px; }
table { border-collapse: collapse; width: 100%; }
th, td { border: 1px solid #ddd; padding: 6px 10px; text-align: right; }
th { background: #f8f9fa; }
td.label { text-align: left; }
</style>
</head>
<body>
<div class="container">
<h1>{{ title }}</h1>
<div class="summary">
<p>📅 実行日時: {{ now }}</p>
{% for key, value in summary.items() %}<p>{{ key }}: {{ value }}</p>
{% endfor %}</div>
{% for section in sections %}
<h2>{{ section.title }}</h2>
{% if section.rows %}
<table>
<tr>{% for column in section.columns %}<th>{{ column }}</th>{% endfor %}</tr>
{% for row in section.rows %}<tr>{% for column in section.columns %}<td class="{{ 'label' if row[column] is string else '' }}">{{ row[column] | fmt }}</td>{% endfor %}</tr>
{% endfor %}</table>
{% else %}<p>✅ 該当なし</p>{% endif %}
{% endfor %}
</div>
</body>
</html>
"""


def _fmt(value):
    if isinstance(value, float):
        return f"{value:.6g}"
    return value


class HTMLReportGenerator:
    """HTMLレポート生成クラス"""

    @staticmethod
    def generate_html_report(title: str, sections: Dict[str, Any], output_path: PathLike, summary: Optional[dict] = None) -> str:
        env = Environment(autoescape=select_autoescape(default=True))
        env.filters["fmt"] = _fmt
        template = env.from_string(_HTML_TEMPLATE)
        rendered_sections = []
        for name, rows in sections.items():
            frame = _as_frame(rows)
            rendered_sections.append({
                "title": name,
                "columns": list(frame.columns),
                "rows": frame.to_dict(orient="records"),
            })
        html = template.render(
            title=title,
            now=datetime.datetime.now().strftime("%Y年%m月%d日 %H:%M:%S"),
            summary=summary or {},
            sections=rendered_sections,
        )
        output_file = Path(output_path)
        output_file.parent.mkdir(parents=True, exist_ok=True)
        output_file.write_text(html, encoding="utf-8")
        logger.info(f"HTMLレポートを出力しました: {output_file}")
        return str(output_file)


class PDFReportGenerator:
    """
    PDFレポート生成クラス

    標準フォント（Helvetica）は日本語を描けないので、PDF の見出しとラベルは英語
    """

    @staticmethod
    def generate_pdf_report(title: str, sections: Dict[str, Any], output_file: PathLike) -> str:
        output_file = str(output_file)
        Path(output_file).parent.mkdir(parents=True, exist_ok=True)
        c = canvas.Canvas(output_file, pagesize=A4)
        _, height = A4
        y = height - 40
        c.setFont("Helvetica-Bold", 16)
        c.drawString(40, y, title)
        y -= 30
        c.setFont("Helvetica", 10)
        c.drawString(40, y, f"Generated: {datetime.datetime.now().strftime('%Y-%m-%d %H:%M:%S')}")
        y -= 30

        def new_page_if_needed():
            nonlocal y
            if y < 60:
                c.showPage()
                c.setFont("Helvetica", 9)
                y = height - 40

        for name, rows in sections.items():
            frame = _as_frame(rows)
            c.setFont("Helvetica-Bold", 12)
            c.drawString(40, y, name)
            y -= 20
            c.setFont("Helvetica", 9)
            c.drawString(50, y, " | ".join(str(col) for col in frame.columns))
            y -= 14
            for record in frame.to_dict(orient="records"):
                c.drawString(50, y, " | ".join(str(_fmt(v)) for v in record.values()))
                y -= 13
                new_page_if_needed()
            y -= 10
            new_page_if_needed()
        c.save()
        logger.info(f"PDFレポートを出力しました: {output_file}")
        return output_file


def save_history(results: Any, org_name: str, target: str, history_dir: PathLike = "history") -> Optional[str]:
    """実行結果を {org}_{対象}_{日時}.json として保存（失敗しても処理は止めない）"""
    try:
        os.makedirs(history_dir, exist_ok=True)
        date_str = datetime.datetime.now().strftime("%Y%m%d_%H%M%S")
        base = os.path.splitext(os.path.basename(str(target)))[0] or "run"
        path = os.path.join(str(history_dir), f"{org_name}_{base}_{date_str}.json")
        with open(path, "w", encoding="utf-8") as f:
            f.write(render_json(results, kind="history"))
        logger.info(f"実行履歴を保存しました: {path}")
        return path
    except OSError as e:
        logger.warning(f"⚠️ 履歴保存エラー: {e}")
        return None


def sections_from_results(results: Sequence[dict]) -> Dict[str, List[dict]]:
    """SelectionResult 行をアルゴリズム別の節に分ける"""
    sections: Dict[str, List[dict]] = {}
    for row in results:
        sections.setdefault(str(row.get("algorithm", "results")), []).append(row)
    return sections
