"""
Flask web server for the Floyd grammar / VPDA toolkit
Exposes the command set of main.py as JSON endpoints
"""

import os
from pathlib import Path

from flask import Flask, jsonify, request
from flask_cors import CORS

from errors import FormatError, ToolkitError
from main import COMMANDS, Command, artifact_kind, execute
from settings import load_settings

app = Flask(__name__)
CORS(app)  # Enable CORS for browser clients

presets_dir = Path(__file__).with_name("presets")
settings = load_settings()


def _preset_files():
    if not presets_dir.is_dir():
        return []
    return sorted(p for p in presets_dir.iterdir() if p.suffix in ('.fg', '.vpda', '.opm'))


def _description(text):
    for line in text.splitlines():
        line = line.strip()
        if line.startswith('#'):
            return line.lstrip('#').strip()
        if line:
            break
    return ''


@app.route('/health', methods=['GET'])
def health_check():
    """Health check endpoint"""
    return jsonify({'status': 'healthy', 'service': 'Floyd Grammar Toolkit API'})


@app.route('/presets', methods=['GET'])
def get_presets():
    """List the bundled grammars and automata"""
    presets = {}
    for path in _preset_files():
        text = path.read_text()
        presets[path.name] = {
            'kind': artifact_kind(path.name),
            'description': _description(text),
            'text': text,
        }
    return jsonify(presets)


@app.route('/run', methods=['POST'])
def run_command():
    """
    Run one toolkit command.

    Body: {"command": "parse", "artifacts": {"g.fg": "..."}, "paths": ["g.fg"],
           "input": "c r", "max_len": 8, "pairing": "c:r", "balanced": false}

    Artifact names not given in "artifacts" are looked up among the presets.
    """
    try:
        params = request.get_json(silent=True) or {}
        name = params.get('command')
        if name not in COMMANDS:
            return jsonify({'error': f"command must be one of {', '.join(COMMANDS)}"}), 400

        artifacts = dict(params.get('artifacts') or {})
        paths = list(params.get('paths') or artifacts)
        if not paths:
            return jsonify({'error': 'no artifacts given'}), 400
        presets = {p.name: p for p in _preset_files()}
        for path in paths:
            if path not in artifacts:
                if path not in presets:
                    raise FormatError("unknown artifact", path)
                artifacts[path] = presets[path].read_text()

        max_len = params.get('max_len')
        cmd = Command(
            name=name,
            paths=paths,
            input=params.get('input'),
            max_len=int(max_len) if max_len is not None else None,
            json=True,
            pairing=params.get('pairing'),
            balanced=bool(params.get('balanced', False)),
            sources=artifacts,
        )
        result = execute(cmd, settings)
        response = dict(result.data)
        response['exit_status'] = result.status
        response['summary'] = result.summary
        response['text'] = result.text
        return jsonify(response)

    except (ToolkitError, ValueError) as e:
        return jsonify({'error': str(e), 'exit_status': 2}), 400
    except Exception as e:
        print(f"Error running command: {e}")
        return jsonify({'error': str(e)}), 500


if __name__ == '__main__':
    port = int(os.environ.get('PORT', 5000))
    debug = os.environ.get('FLASK_DEBUG', '0') == '1'
    print("🚀 Starting Floyd Grammar Toolkit Server...")
    print(f"🔧 API: http://localhost:{port}/run")
    print(f"🧩 Presets: {presets_dir}")
    app.run(debug=debug, host='0.0.0.0', port=port)
