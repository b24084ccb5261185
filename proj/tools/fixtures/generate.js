// Regenerates the bytecode fixtures under tests/fixtures/ with solc-js.
// Usage: npm install solc@0.8.26 @openzeppelin/contracts@4.9.6 && node generate.js <out-dir>
'use strict';
const fs = require('fs');
const path = require('path');
const solc = require('solc');

const outDir = process.argv[2] || path.join(__dirname, '..', '..', 'tests', 'fixtures');
const ozRoot = path.dirname(require.resolve('@openzeppelin/contracts/package.json'));

function findImports(p) {
  if (p.startsWith('@openzeppelin/contracts/')) {
    return { contents: fs.readFileSync(path.join(ozRoot, p.slice('@openzeppelin/contracts/'.length)), 'utf8') };
  }
  return { error: 'not found: ' + p };
}

function compile(name, source, contract, optimize, runs) {
  const input = {
    language: 'Solidity',
    sources: { [name + '.sol']: { content: source } },
    settings: {
      evmVersion: 'shanghai',
      optimizer: { enabled: optimize, runs: runs || 200 },
      outputSelection: { '*': { '*': ['evm.deployedBytecode.object'] } },
    },
  };
  const out = JSON.parse(solc.compile(JSON.stringify(input), { import: findImports }));
  const errors = (out.errors || []).filter((e) => e.severity === 'error');
  if (errors.length) throw new Error(name + ': ' + errors.map((e) => e.formattedMessage).join('\n'));
  return out.contracts[name + '.sol'][contract].evm.deployedBytecode.object;
}

function write(sub, name, hex) {
  const dir = path.join(outDir, sub);
  fs.mkdirSync(dir, { recursive: true });
  fs.writeFileSync(path.join(dir, name + '.hex'), '0x' + hex + '\n');
}

// --- empty contract, for metadata stripping ---------------------------------
write('misc', 'empty_contract', compile('A', 'pragma solidity ^0.8.0; contract A{}', 'A', false));

// --- OpenZeppelin ERC-721 collections ---------------------------------------
const ozVariants = [
  ['Basic', ['ERC721'], 'plain'],
  ['Enumerable', ['ERC721Enumerable'], 'plain'],
  ['UriStorage', ['ERC721URIStorage'], 'uri'],
  ['Burnable', ['ERC721Burnable'], 'plain'],
  ['Pausable', ['ERC721Pausable'], 'pause'],
  ['Royalty', ['ERC721Royalty'], 'royalty'],
  ['EnumBurn', ['ERC721Enumerable', 'ERC721Burnable'], 'plain'],
  ['UriBurn', ['ERC721URIStorage', 'ERC721Burnable'], 'uri'],
  ['EnumPause', ['ERC721Enumerable', 'ERC721Pausable'], 'pause'],
  ['RoyaltyBurn', ['ERC721Royalty', 'ERC721Burnable'], 'royalty'],
];
const ozImport = {
  ERC721: 'token/ERC721/ERC721.sol',
  ERC721Enumerable: 'token/ERC721/extensions/ERC721Enumerable.sol',
  ERC721URIStorage: 'token/ERC721/extensions/ERC721URIStorage.sol',
  ERC721Burnable: 'token/ERC721/extensions/ERC721Burnable.sol',
  ERC721Pausable: 'token/ERC721/extensions/ERC721Pausable.sol',
  ERC721Royalty: 'token/ERC721/extensions/ERC721Royalty.sol',
};

function ozSource(name, bases, flavor) {
  const imports = ['access/Ownable.sol', ...bases.map((b) => ozImport[b])]
    .map((p) => `import "@openzeppelin/contracts/${p}";`).join('\n');
  const overrides = [];
  const defines = {
    _beforeTokenTransfer: ['ERC721Enumerable', 'ERC721Pausable'],
    supportsInterface: ['ERC721Enumerable', 'ERC721URIStorage', 'ERC721Royalty'],
    tokenURI: ['ERC721URIStorage'],
    _burn: ['ERC721URIStorage', 'ERC721Royalty'],
  };
  // An explicit override is needed only when two listed bases both define the function.
  const ov = (fn, sig, ret, body) => {
    const owners = bases.filter((b) => defines[fn].includes(b));
    if (owners.length === 0 || bases.length < 2) return;
    const list = owners.length < bases.length ? ['ERC721', ...owners] : owners;
    overrides.push(`    function ${fn}(${sig}) ${ret.replace('OVR', `override(${list.join(', ')})`)} { ${body} }`);
  };
  ov('_beforeTokenTransfer', 'address from, address to, uint256 firstTokenId, uint256 batchSize', 'internal OVR', 'super._beforeTokenTransfer(from, to, firstTokenId, batchSize);');
  ov('supportsInterface', 'bytes4 interfaceId', 'public view OVR returns (bool)', 'return super.supportsInterface(interfaceId);');
  ov('tokenURI', 'uint256 tokenId', 'public view OVR returns (string memory)', 'return super.tokenURI(tokenId);');
  ov('_burn', 'uint256 tokenId', 'internal OVR', 'super._burn(tokenId);');
  const extra = {
    plain: '',
    uri: '    function setTokenURI(uint256 id, string memory uri) external onlyOwner { _setTokenURI(id, uri); }',
    pause: '    function pause() external onlyOwner { _pause(); }\n    function unpause() external onlyOwner { _unpause(); }',
    royalty: '    function setRoyalty(address r, uint96 fee) external onlyOwner { _setDefaultRoyalty(r, fee); }',
  }[flavor];
  return `// SPDX-License-Identifier: MIT
pragma solidity ^0.8.20;
${imports}
contract ${name} is ${bases.join(', ')}, Ownable {
    uint256 public nextId;
    uint256 public maxSupply = 10000;
    constructor() ERC721("${name}", "${name.slice(0, 3).toUpperCase()}") {}
    function safeMint(address to) external onlyOwner { require(nextId < maxSupply); _safeMint(to, nextId); nextId += 1; }
${extra}
${overrides.join('\n')}
}
`;
}

let n = 0;
for (const [name, bases, flavor] of ozVariants) {
  for (const opt of [false, true]) {
    const cname = "Nft" + name; const src = ozSource(cname, bases, flavor);
    write('erc721', `oz_${name.toLowerCase()}_${opt ? 'opt' : 'noopt'}`, compile(cname, src, cname, opt));
    n++;
  }
}

// --- Hand-written collections with a reentrant mint (modeled on a real incident) ---
function vulnerableSource(i) {
  const name = `DropCollection${i}`;
  const limit = 100 + 37 * i;
  const extras = [
    `    function setPrice(uint256 p) external { require(msg.sender == owner); price = p; }`,
    `    function withdraw() external { require(msg.sender == owner); payable(owner).transfer(address(this).balance); }`,
    `    function setBaseURI(string calldata u) external { require(msg.sender == owner); baseURI = u; }`,
    `    function flipSale() external { require(msg.sender == owner); saleActive = !saleActive; }`,
  ].filter((_, k) => ((i >> k) & 1) === 1 || k === i % 4).join('\n');
  return `// SPDX-License-Identifier: MIT
pragma solidity ^0.8.20;
interface IERC721Receiver { function onERC721Received(address, address, uint256, bytes calldata) external returns (bytes4); }
contract ${name} {
    mapping(uint256 => address) private _owners;
    mapping(address => uint256) private _balances;
    mapping(uint256 => address) private _tokenApprovals;
    uint256 public tokenNumber;
    uint256 public tokenLimit = ${limit};
    uint256 public price = ${i + 1} * 1e15;
    address public owner;
    bool public saleActive = true;
    string public baseURI;
    event Transfer(address indexed from, address indexed to, uint256 indexed tokenId);
    event ConsecutiveTransfer(uint256 indexed fromTokenId, uint256 toTokenId, address indexed fromAddress, address indexed toAddress);
    constructor() { owner = msg.sender; }
    function _isMintable(uint256 nftType) internal view returns (bool) { return nftType > ${i % 5} && !saleActive; }
    function _checkOnERC721Received(address from, address to, uint256 tokenId, bytes memory data) private returns (bool) {
        if (to.code.length == 0) return true;
        return IERC721Receiver(to).onERC721Received(msg.sender, from, tokenId, data) == IERC721Receiver.onERC721Received.selector;
    }
    function mint(uint256 nftType, uint256 count, address to) public {
        require(!_isMintable(nftType));
        uint256 first = tokenNumber;
        uint256 last = first + count;
        require(last <= tokenLimit);
        for (uint256 tokenId = first; tokenId < last; tokenId++) {
            _owners[tokenId] = to;
            require(_checkOnERC721Received(address(0), to, tokenId, ""));
        }
        _balances[to] += count;
        tokenNumber = last;
        emit ConsecutiveTransfer(first, last, address(0), to);
    }
    function ownerOf(uint256 tokenId) external view returns (address) { return _owners[tokenId]; }
    function balanceOf(address a) external view returns (uint256) { return _balances[a]; }
    function approve(address to, uint256 tokenId) external { require(_owners[tokenId] == msg.sender); _tokenApprovals[tokenId] = to; }
    function getApproved(uint256 tokenId) external view returns (address) { return _tokenApprovals[tokenId]; }
${extras}
}
`;
}
for (let i = 0; i < 20; i++) {
  const name = `DropCollection${i}`;
  write('defective', `drop_${String(i).padStart(2, '0')}`, compile(name, vulnerableSource(i), name, i % 2 === 1, 200 + 50 * i));
}

// Seeded-defect report: every drop collection mints before updating its counter.
fs.writeFileSync(path.join(outDir, 'defective', 'seeded_defects.json'), JSON.stringify(
  Array.from({ length: 20 }, (_, i) => ({
    contract: `drop_${String(i).padStart(2, '0')}`,
    function: 'mint(uint256,uint256,address)',
    defect: 'BypassAuthReentrancy',
    subtype: 'reentrancy',
  })), null, 2) + '\n');

// CEI-respecting counterpart of the drop collection: state updated before the callback.
{
  const src = vulnerableSource(0).replace('DropCollection0', 'SafeDrop').replace(
    /uint256 first = tokenNumber;[\s\S]*?emit ConsecutiveTransfer/,
    `uint256 first = tokenNumber;
        uint256 last = first + count;
        require(last <= tokenLimit);
        tokenNumber = last;
        _balances[to] += count;
        for (uint256 tokenId = first; tokenId < last; tokenId++) { _owners[tokenId] = to; }
        emit ConsecutiveTransfer`);
  write('misc', 'safe_drop', compile('SafeDrop', src, 'SafeDrop', false));
}

// --- Unrelated defect-free contracts ----------------------------------------
const cleanBodies = [
  (i) => `uint256 private v; function store${i}(uint256 x) external { v = x + ${i}; } function retrieve${i}() external view returns (uint256) { return v; }`,
  (i) => `mapping(address => uint256) private c; function bump${i}() external { c[msg.sender] += ${i + 1}; } function countOf${i}(address a) external view returns (uint256) { return c[a]; }`,
  (i) => `function mix${i}(uint256 a, uint256 b) external pure returns (uint256) { return (a * ${i + 3}) ^ (b >> ${i % 7}); } function fold${i}(uint256[] calldata xs) external pure returns (uint256 s) { for (uint256 k = 0; k < xs.length; k++) s += xs[k] * ${i + 1}; }`,
  (i) => `bytes32 private h; function commit${i}(bytes32 x) external { h = keccak256(abi.encode(x, ${i})); } function reveal${i}(bytes32 x) external view returns (bool) { return h == keccak256(abi.encode(x, ${i})); }`,
  (i) => `uint256[] private q; function push${i}(uint256 x) external { q.push(x); } function size${i}() external view returns (uint256) { return q.length; } function at${i}(uint256 k) external view returns (uint256) { return q[k]; }`,
];
for (let i = 0; i < 20; i++) {
  const name = `Utility${i}`;
  const src = `// SPDX-License-Identifier: MIT
pragma solidity ^0.8.20;
contract ${name} { ${cleanBodies[i % cleanBodies.length](i)} }
`;
  write('clean', `utility_${String(i).padStart(2, '0')}`, compile(name, src, name, i % 3 === 0));
}
console.log('erc721:', n, 'defective: 20, clean: 20');
